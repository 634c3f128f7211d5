"""Stage orchestration with per-stage manifests.

Each stage persists its outputs and a manifest under the run directory, so
a crashed or partial run resumes without re-paying for earlier stages.
Manifests store paths relative to the run directory, keeping runs
byte-comparable across locations.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from . import curriculum, export, retrieval, selection, synthesis
from .config import config_hash
from .samples import read_samples, write_samples, Sample

log = logging.getLogger(__name__)

STAGES = ("corpus", "generate", "adapt", "score", "select", "export",
          "report")

INDEX_FILE = "corpus_index.pkl"
INITIAL_FILE = "s_initial.jsonl"
SYNTH_FILE = "s_synth.jsonl"
SCORED_FILE = "scored.jsonl"
TRAIN_FILE = "s_train.jsonl"
EXPORT_DIR = "export"
REPORT_FILE = "report.json"


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def _manifest_path(out_dir, stage):
    return Path(out_dir) / "manifests" / f"{stage}.json"


def write_manifest(out_dir, stage, cfg, inputs, outputs, counts):
    path = _manifest_path(out_dir, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": stage,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "input_paths": sorted(inputs),
        "output_paths": sorted(outputs),
        "counts": counts,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def load_manifest(out_dir, stage):
    path = _manifest_path(out_dir, stage)
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def stage_is_fresh(out_dir, stage, cfg):
    """A stage may be skipped when its manifest matches the config and all
    of its outputs still exist."""
    manifest = load_manifest(out_dir, stage)
    if manifest is None or manifest["config_hash"] != config_hash(cfg):
        return False
    return all((Path(out_dir) / p).exists()
               for p in manifest["output_paths"])


def load_corpus_index(out_dir, cfg):
    if not cfg.corpus_paths:
        return None
    cache = Path(out_dir) / INDEX_FILE
    corpus_hash = retrieval.corpus_content_hash(cfg.corpus_paths)
    index = retrieval.load_index(cache, corpus_hash)
    if index is None:
        raise StageError("corpus", "index cache missing or stale; run the "
                                   "corpus stage first")
    return index


def run_corpus(cfg, out_dir):
    if not cfg.corpus_paths:
        raise StageError("corpus", "config has no corpus_paths")
    try:
        index = retrieval.ingest(cfg.corpus_paths)
    except retrieval.CorpusError as exc:
        raise StageError("corpus", str(exc))
    corpus_hash = retrieval.corpus_content_hash(cfg.corpus_paths)
    cache = Path(out_dir) / INDEX_FILE
    cache.parent.mkdir(parents=True, exist_ok=True)
    retrieval.save_index(index, cache, corpus_hash)
    write_manifest(out_dir, "corpus", cfg, cfg.corpus_paths, [INDEX_FILE],
                   {"passages": index.doc_count})
    return index


def run_generate(task, cfg, out_dir, index=None):
    if index is None and cfg.corpus_paths:
        index = load_corpus_index(out_dir, cfg)
    samples, stats = synthesis.synthesize_initial(task, cfg, index)
    write_samples(samples, Path(out_dir) / INITIAL_FILE)
    write_manifest(out_dir, "generate", cfg,
                   [INDEX_FILE] if index is not None else [],
                   [INITIAL_FILE], stats.to_dict())
    return samples


def run_adapt(task, cfg, out_dir):
    initial = read_samples(Path(out_dir) / INITIAL_FILE)
    partition = curriculum.classify(initial, cfg.base_backend, task, cfg)
    harder, easier, reasons = curriculum.rewrite_all(
        partition, cfg.instructor_backend, task, cfg)
    combined = curriculum.assemble(initial, harder, easier)
    write_samples(combined, Path(out_dir) / SYNTH_FILE)
    write_manifest(out_dir, "adapt", cfg, [INITIAL_FILE], [SYNTH_FILE], {
        "initial": len(initial),
        "solved": len(partition.solved),
        "unsolved": len(partition.unsolved),
        "harder": len(harder),
        "easier": len(easier),
        "combined": len(combined),
        "rewrite_rejections": dict(sorted(reasons.items())),
    })
    return combined


def write_scored(scored, path):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in scored:
            fh.write(json.dumps({
                "sample": entry.sample.to_dict(),
                "pass_count": entry.pass_count,
                "score": entry.score,
            }, sort_keys=True, ensure_ascii=False) + "\n")


def read_scored(path):
    scored = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            scored.append(selection.ScoredSample(
                sample=Sample.from_dict(rec["sample"]),
                pass_count=rec["pass_count"],
                score=rec["score"]))
    return scored


def run_score(task, cfg, out_dir):
    samples = read_samples(Path(out_dir) / SYNTH_FILE)
    scored = selection.score_samples(samples, cfg.base_backend, task, cfg)
    write_scored(scored, Path(out_dir) / SCORED_FILE)
    write_manifest(out_dir, "score", cfg, [SYNTH_FILE], [SCORED_FILE],
                   {"scored": len(scored),
                    "inferences_per_sample": cfg.pass_samples})
    return scored


def run_select(cfg, out_dir):
    scored = read_scored(Path(out_dir) / SCORED_FILE)
    m = cfg.m_train
    if m > len(scored):
        log.warning("m_train=%d exceeds the %d scored samples; selecting "
                    "all", m, len(scored))
        m = len(scored)
    train = selection.select(scored, m)
    padding = sum(1 for entry in scored
                  if entry.sample.id in {s.id for s in train}
                  and entry.score >= 1.0)
    write_samples(train, Path(out_dir) / TRAIN_FILE)
    write_manifest(out_dir, "select", cfg, [SCORED_FILE], [TRAIN_FILE],
                   {"requested": cfg.m_train, "selected": len(train),
                    "score_one_padding": padding})
    return train


def run_export(task, cfg, out_dir):
    train = read_samples(Path(out_dir) / TRAIN_FILE)
    scored = read_scored(Path(out_dir) / SCORED_FILE)
    meta = {e.sample.id: (e.pass_count, e.score) for e in scored}
    try:
        manifest = export.export(train, meta, task, cfg.trainer_profile,
                                 Path(out_dir) / EXPORT_DIR)
    except export.ExportError as exc:
        raise StageError("export", str(exc))
    outputs = [f"{EXPORT_DIR}/{export.RECORDS_FILE}",
               f"{EXPORT_DIR}/{export.REWARD_SPEC_FILE}",
               f"{EXPORT_DIR}/{export.TRAINER_CONFIG_FILE}"]
    write_manifest(out_dir, "export", cfg, [TRAIN_FILE, SCORED_FILE],
                   outputs, {"records": manifest["count"]})
    return manifest


def run_report(task, cfg, out_dir, tokenizer=None):
    samples = read_samples(Path(out_dir) / SYNTH_FILE)
    scored_path = Path(out_dir) / SCORED_FILE
    pass_counts = None
    if scored_path.exists():
        by_id = {e.sample.id: e.pass_count for e in read_scored(scored_path)}
        pass_counts = [by_id[s.id] for s in samples if s.id in by_id]
    rep = export.report(samples, pass_counts, cfg, tokenizer=tokenizer)
    path = Path(out_dir) / REPORT_FILE
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rep.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(out_dir, "report", cfg, [SYNTH_FILE], [REPORT_FILE],
                   {"samples": len(samples)})
    return rep


def run_all(task, cfg, out_dir, resume=False):
    """Full pipeline: corpus -> generate -> adapt -> score -> select ->
    export, plus the trainer hand-off when a command template is set.

    Returns the export manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    index = None
    if cfg.corpus_paths:
        if resume and stage_is_fresh(out_dir, "corpus", cfg):
            log.info("corpus stage is fresh; skipping")
            index = load_corpus_index(out_dir, cfg)
        else:
            index = run_corpus(cfg, out_dir)

    steps = (
        ("generate", lambda: run_generate(task, cfg, out_dir, index)),
        ("adapt", lambda: run_adapt(task, cfg, out_dir)),
        ("score", lambda: run_score(task, cfg, out_dir)),
        ("select", lambda: run_select(cfg, out_dir)),
        ("export", lambda: run_export(task, cfg, out_dir)),
    )
    for stage, step in steps:
        if resume and stage_is_fresh(out_dir, stage, cfg):
            log.info("%s stage is fresh; skipping", stage)
            continue
        step()

    manifest = load_manifest(out_dir, "export")
    export_manifest = {
        "records_path": str(out / EXPORT_DIR / export.RECORDS_FILE),
        "reward_spec_path": str(out / EXPORT_DIR / export.REWARD_SPEC_FILE),
        "trainer_config_path": str(out / EXPORT_DIR /
                                   export.TRAINER_CONFIG_FILE),
        "count": manifest["counts"]["records"],
    }
    if cfg.trainer_profile.command_template:
        status = export.invoke_trainer(export_manifest, cfg.trainer_profile)
        if status != 0:
            raise StageError("trainer", f"trainer exited with {status}")
    return export_manifest
