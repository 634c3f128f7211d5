"""Trainer-ready export, optional trainer invocation, dataset diagnostics,
and the zero-shot evaluation protocol."""

from __future__ import annotations

import json
import logging
import math
import random
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from . import gateway
from .answers import extract_answer, answers_equal, normalize, ExtractedAnswer
from .prompts import build_solve_prompt

log = logging.getLogger(__name__)

HISTOGRAM_BINS = 10
SIMILARITY_PAIR_CAP = 10_000

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

RECORDS_FILE = "train_records.jsonl"
REWARD_SPEC_FILE = "reward_spec.json"
TRAINER_CONFIG_FILE = "trainer_config.json"


class ExportError(RuntimeError):
    pass


def word_count(text):
    """Default tokenizer: whitespace-and-punctuation word count."""
    return len(_WORD_RE.findall(text))


def compute_reward(completion, ground_truth, answer_format):
    """Binary exact-match reward a downstream trainer applies per rollout."""
    predicted = extract_answer(completion, answer_format)
    if predicted is None:
        return 0.0
    truth = ExtractedAnswer(raw=ground_truth,
                            normalized=normalize(ground_truth,
                                                 predicted.format),
                            format=predicted.format)
    return 1.0 if answers_equal(predicted, truth) else 0.0


def export(train, scored_meta, task, profile, out_dir):
    """Write training records, the reward spec, and the trainer config.

    scored_meta maps sample id -> (pass_count, score); samples without an
    entry get null metadata.
    """
    if not train:
        raise ExportError("nothing to export")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out_dir}: {exc}")

    records_path = out / RECORDS_FILE
    with open(records_path, "w", encoding="utf-8") as fh:
        for sample in train:
            label = extract_answer(sample.output, task.answer_format)
            if label is None:
                raise ExportError(
                    f"sample {sample.id} has no extractable answer")
            pass_count, sample_score = scored_meta.get(sample.id,
                                                       (None, None))
            fh.write(json.dumps({
                "prompt": build_solve_prompt(task, sample.input),
                "ground_truth": label.normalized,
                "metadata": {
                    "sample_id": sample.id,
                    "provenance": sample.provenance,
                    "parent_id": sample.parent_id,
                    "pass_count": pass_count,
                    "score": sample_score,
                },
            }, sort_keys=True, ensure_ascii=False) + "\n")

    reward_spec_path = out / REWARD_SPEC_FILE
    with open(reward_spec_path, "w", encoding="utf-8") as fh:
        json.dump({
            "reward": "exact_match",
            "answer_format": task.answer_format.value,
            "equality": "normalized_rational",
            "correct_reward": 1.0,
            "incorrect_reward": 0.0,
            "format_bonus": {"enabled": False, "bonus": 0.0},
        }, fh, sort_keys=True, indent=2)
        fh.write("\n")

    trainer_config_path = out / TRAINER_CONFIG_FILE
    with open(trainer_config_path, "w", encoding="utf-8") as fh:
        json.dump({
            "algorithm": profile.algorithm_name,
            "learning_rate": profile.learning_rate,
            "responses_per_prompt": profile.responses_per_prompt,
            "batch_size": profile.batch_size,
            "max_response_length": profile.max_response_length,
            "kl_coefficient": profile.kl_coefficient,
            "epochs": profile.epochs,
        }, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return {
        "records_path": str(records_path),
        "reward_spec_path": str(reward_spec_path),
        "trainer_config_path": str(trainer_config_path),
        "count": len(train),
    }


def read_training_records(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def invoke_trainer(manifest, profile):
    """Substitute export paths into the command template and run it."""
    template = profile.command_template
    if not template:
        raise ExportError("trainer_profile.command_template is not set")
    if "{data_path}" not in template:
        raise ExportError("command_template must contain {data_path}")
    try:
        command = template.format(
            data_path=manifest["records_path"],
            reward_spec_path=manifest["reward_spec_path"],
            trainer_config_path=manifest["trainer_config_path"])
    except KeyError as exc:
        raise ExportError(f"command_template has an unknown slot: {exc}")
    log.info("invoking trainer: %s", command)
    proc = subprocess.run(shlex.split(command), capture_output=True,
                          text=True)
    for line in proc.stdout.splitlines():
        log.info("trainer: %s", line)
    if proc.returncode != 0:
        tail = "\n".join(proc.stderr.splitlines()[-10:])
        log.error("trainer exited %d; stderr tail:\n%s",
                  proc.returncode, tail)
    return proc.returncode


@dataclass
class DatasetReport:
    pass_rate_histogram: list[int] | None = None
    length_stats: dict | None = None
    similarity_stats: dict | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "pass_rate_histogram": self.pass_rate_histogram,
            "length_stats": self.length_stats,
            "similarity_stats": self.similarity_stats,
            "notes": list(self.notes),
        }


def pass_rate_histogram(pass_counts, total):
    """Counts over ten equal bins of pass_count/total; rate 1.0 lands in
    the top bin."""
    bins = [0] * HISTOGRAM_BINS
    for count in pass_counts:
        rate = count / total
        idx = min(int(rate * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
        bins[idx] += 1
    return bins


def _cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def report(samples, pass_counts, config, tokenizer=None):
    """Dataset diagnostics: difficulty histogram, input lengths, pairwise
    embedding similarity. Sections with missing prerequisites are skipped
    and noted."""
    rep = DatasetReport()

    if pass_counts is not None:
        rep.pass_rate_histogram = pass_rate_histogram(
            pass_counts, config.pass_samples)
    else:
        rep.notes.append("difficulty histogram skipped: no pass counts")

    counter = tokenizer or word_count
    label = getattr(counter, "__name__", "tokenizer")
    lengths = [counter(s.input) for s in samples]
    if lengths:
        ordered = sorted(lengths)
        rep.length_stats = {
            "tokenizer": label,
            "counts": lengths,
            "min": ordered[0],
            "max": ordered[-1],
            "mean": sum(lengths) / len(lengths),
            "median": ordered[len(ordered) // 2],
        }

    backend = config.embedding_backend
    if backend is None:
        rep.notes.append("similarity skipped: no embedding backend")
    elif len(samples) < 2:
        rep.notes.append("similarity skipped: fewer than 2 samples")
    else:
        vectors = gateway.embed([s.input for s in samples], backend)
        n = len(vectors)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if len(pairs) > SIMILARITY_PAIR_CAP:
            rng = random.Random(config.seed)
            pairs = rng.sample(pairs, SIMILARITY_PAIR_CAP)
        sims = [_cosine(vectors[i], vectors[j]) for i, j in pairs]
        hist = [0] * HISTOGRAM_BINS
        for sim in sims:
            # Cosine lies in [-1, 1]; map onto ten bins.
            idx = min(int((sim + 1) / 2 * HISTOGRAM_BINS),
                      HISTOGRAM_BINS - 1)
            hist[idx] += 1
        rep.similarity_stats = {
            "pair_count": len(sims),
            "mean": sum(sims) / len(sims),
            "histogram": hist,
        }
    return rep


def evaluate(model, test_set, task, config):
    """Zero-shot accuracy: one greedy completion per labeled record."""
    if not test_set:
        raise ValueError("test set is empty")
    reqs = [
        gateway.CompletionRequest(
            request_index=i,
            prompt=build_solve_prompt(task, rec["input"]),
            temperature=config.solve_temperature,
            max_tokens=config.trainer_profile.max_response_length)
        for i, rec in enumerate(test_set)
    ]
    batch = gateway.complete_many(reqs, model)
    if batch.errors:
        idx, exc = batch.errors[0]
        raise gateway.GatewayError(f"evaluation failed on record "
                                   f"{idx}: {exc}")
    by_index = {r.request_index: r for r in batch.results}
    correct = 0
    for i, rec in enumerate(test_set):
        predicted = extract_answer(by_index[i].completions[0],
                                   task.answer_format)
        label = ExtractedAnswer(raw=rec["label"],
                                normalized=normalize(rec["label"],
                                                     task.answer_format),
                                format=task.answer_format)
        if predicted is not None and answers_equal(predicted, label):
            correct += 1
    return correct / len(test_set)
