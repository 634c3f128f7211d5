"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 stage failure,
3 generation budget exhausted.
"""

from __future__ import annotations

import json
import logging
import sys

import click

from . import export as export_mod
from . import pipeline
from .config import ConfigError, load_config, load_task, PipelineConfig
from .gateway import GatewayError
from .synthesis import BudgetExhaustedError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2
EXIT_BUDGET = 3

log = logging.getLogger(__name__)


def _setup_logging(verbose):
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


def _load(config_path, task_ref, seed):
    cfg = load_config(config_path) if config_path else PipelineConfig()
    if seed is not None:
        cfg.seed = seed
    task = load_task(task_ref)
    return cfg, task


def _run_stage(fn):
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except BudgetExhaustedError as exc:
        click.echo(f"generation budget exhausted: {exc}", err=True)
        sys.exit(EXIT_BUDGET)
    except (pipeline.StageError, GatewayError, OSError) as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    sys.exit(EXIT_OK)


config_opt = click.option("--config", "config_path", default=None,
                          type=click.Path(exists=True),
                          help="Pipeline config file (YAML).")
task_opt = click.option("--task", "task_ref", required=True,
                        help="Task definition file or preset name.")
out_opt = click.option("--out", "out_dir", required=True,
                       type=click.Path(), help="Run directory.")
seed_opt = click.option("--seed", type=int, default=None,
                        help="Override the config seed.")


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    _setup_logging(verbose)


@main.command()
@config_opt
@task_opt
@out_opt
@seed_opt
@click.option("--resume", is_flag=True,
              help="Skip stages whose manifests match the config.")
def run(config_path, task_ref, out_dir, seed, resume):
    """Run the whole pipeline and export trainer-ready records."""
    def go():
        cfg, task = _load(config_path, task_ref, seed)
        manifest = pipeline.run_all(task, cfg, out_dir, resume=resume)
        click.echo(f"exported {manifest['count']} records to "
                   f"{manifest['records_path']}")
    _run_stage(go)


@main.command()
@config_opt
@out_opt
@seed_opt
def corpus(config_path, out_dir, seed):
    """Build and cache the passage index."""
    def go():
        cfg = load_config(config_path) if config_path else PipelineConfig()
        if seed is not None:
            cfg.seed = seed
        index = pipeline.run_corpus(cfg, out_dir)
        click.echo(f"indexed {index.doc_count} passages")
    _run_stage(go)


def _simple_stage(name, runner, needs_task=True):
    @main.command(name=name)
    @config_opt
    @task_opt
    @out_opt
    @seed_opt
    def _cmd(config_path, task_ref, out_dir, seed):
        def go():
            cfg, task = _load(config_path, task_ref, seed)
            runner(task, cfg, out_dir)
        _run_stage(go)
    _cmd.__doc__ = f"Run the {name} stage from persisted artifacts."
    return _cmd


generate = _simple_stage("generate",
                         lambda t, c, o: pipeline.run_generate(t, c, o))
adapt = _simple_stage("adapt", pipeline.run_adapt)
score = _simple_stage("score", pipeline.run_score)
select = _simple_stage("select", lambda t, c, o: pipeline.run_select(c, o))


@main.command(name="export")
@config_opt
@task_opt
@out_opt
@seed_opt
@click.option("--train", "invoke", is_flag=True,
              help="Also invoke the configured trainer command.")
def export_cmd(config_path, task_ref, out_dir, seed, invoke):
    """Export trainer-ready records, reward spec, and trainer config."""
    def go():
        cfg, task = _load(config_path, task_ref, seed)
        manifest = pipeline.run_export(task, cfg, out_dir)
        click.echo(f"exported {manifest['count']} records")
        if invoke:
            status = export_mod.invoke_trainer(manifest, cfg.trainer_profile)
            if status != 0:
                raise pipeline.StageError("trainer",
                                          f"trainer exited with {status}")
    _run_stage(go)


@main.command()
@config_opt
@task_opt
@out_opt
@seed_opt
def report(config_path, task_ref, out_dir, seed):
    """Write dataset diagnostics for the adapted sample set."""
    def go():
        cfg, task = _load(config_path, task_ref, seed)
        rep = pipeline.run_report(task, cfg, out_dir)
        click.echo(json.dumps(rep.to_dict(), sort_keys=True, indent=2))
    _run_stage(go)


@main.command(name="eval")
@config_opt
@task_opt
@seed_opt
@click.option("--test-set", "test_path", required=True,
              type=click.Path(exists=True),
              help="Line-delimited records with input and label fields.")
def eval_cmd(config_path, task_ref, seed, test_path):
    """Measure zero-shot accuracy of the base backend on a labeled set."""
    def go():
        cfg, task = _load(config_path, task_ref, seed)
        records = []
        with open(test_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        accuracy = export_mod.evaluate(cfg.base_backend, records, task, cfg)
        click.echo(f"accuracy: {accuracy:.4f}")
    _run_stage(go)


if __name__ == "__main__":
    main()
