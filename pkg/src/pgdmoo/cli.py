"""Command-line driver: gen-data, train, sample, evaluate, ablate, report.

Resolution order for every setting: built-in defaults, then command-line
flags, then the ``--config`` JSON file (file values win).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .config import FAST_T, ExperimentConfig
from .errors import PgdMooError
from .metrics import IndicatorReport

log = logging.getLogger("pgdmoo")

# flag name -> dotted config key
FLAG_KEYS = {
    "problem": "problem",
    "n_points": "N",
    "seeds": "seeds",
    "output_dir": "output_dir",
    "timesteps": "diffusion.T",
    "beta_start": "diffusion.beta_start",
    "beta_end": "diffusion.beta_end",
    "den_epochs": "diffusion.epochs",
    "den_lr": "diffusion.lr",
    "den_batch_size": "diffusion.batch_size",
    "cls_epochs": "classifier.epochs",
    "cls_lr": "classifier.lr",
    "cls_batch_size": "classifier.batch_size",
    "criterion": "classifier.criterion",
    "prune_fraction": "classifier.prune_fraction",
    "gradient_mode": "classifier.gradient_mode",
    "w": "guidance.w",
    "budget": "guidance.n",
}


def _seed_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(s) for s in value.split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers, e.g. 0,1,2") from None


def _merge(base, over):
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def resolve_config(config_path=None, fast=False, **flags):
    cfg = ExperimentConfig()
    overrides = {FLAG_KEYS[k]: v for k, v in flags.items() if v is not None}
    if fast and "diffusion.T" not in overrides:
        overrides["diffusion.T"] = FAST_T
    cfg = cfg.with_overrides(overrides)
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise pipeline.MissingInputError(f"missing config file: {path}")
        data = _merge(cfg.to_dict(), json.loads(path.read_text()))
        cfg = ExperimentConfig.from_dict(data)
    return cfg


def experiment_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config; overrides flags."),
        click.option("--problem", help="Benchmark task, e.g. zdt2."),
        click.option("--N", "n_points", type=int, help="Offline dataset size."),
        click.option("--seeds", callback=_seed_list, help="Comma-separated seeds."),
        click.option("--output-dir", help="Root directory for all outputs."),
        click.option("--T", "timesteps", type=int, help="Diffusion steps."),
        click.option("--fast", is_flag=True, help=f"Use T={FAST_T} unless --T is given."),
        click.option("--beta-start", type=float),
        click.option("--beta-end", type=float),
        click.option("--den-epochs", type=int),
        click.option("--den-lr", type=float),
        click.option("--den-batch-size", type=int),
        click.option("--cls-epochs", type=int),
        click.option("--cls-lr", type=float),
        click.option("--cls-batch-size", type=int),
        click.option("--criterion", help="Crowding, HypervolumeImprovement or None."),
        click.option("--prune-fraction", type=float, help="Classifier training keeps this top fraction."),
        click.option("--gradient-mode", type=click.Choice(["log", "raw"])),
        click.option("--w", type=float, help="Guidance weight."),
        click.option("--budget", type=int, help="Number of designs to sample."),
        click.option("--parallel-seeds", is_flag=True, help="Run seeds concurrently."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)

    @functools.wraps(fn)
    def wrapper(config_path, fast, parallel_seeds, **kw):
        flags = {k: kw.pop(k) for k in list(kw) if k in FLAG_KEYS}
        cfg = resolve_config(config_path, fast=fast, **flags)
        return fn(cfg=cfg, parallel=parallel_seeds, **kw)

    return wrapper


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logging.")
def cli(verbose):
    """Preference-guided diffusion for offline multi-objective optimization."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command("gen-data")
@experiment_options
def gen_data(cfg, parallel):
    """Sample and evaluate the offline dataset for each seed."""
    for p in pipeline.for_each_seed(cfg, lambda s: pipeline.gen_data(cfg, s), parallel):
        click.echo(str(p))


@cli.command()
@experiment_options
@click.option("--only", type=click.Choice(["denoiser", "classifier"]), help="Train a single network.")
def train(cfg, parallel, only):
    """Train the denoiser and the preference classifier."""
    def run(seed):
        return pipeline.train(cfg, seed, denoiser=only in (None, "denoiser"),
                              classifier=only in (None, "classifier"))

    for outs in pipeline.for_each_seed(cfg, run, parallel):
        for p in outs:
            click.echo(str(p))


@cli.command()
@experiment_options
@click.option("--unconditional", is_flag=True, help="Plain ancestral sampling, no classifier.")
@click.option("--force", is_flag=True, help="Use checkpoints trained under a different config.")
@click.option("--trajectory-every", type=int, help="Also write every k-th intermediate state.")
def sample(cfg, parallel, unconditional, force, trajectory_every):
    """Generate designs; writes designs-<tag>.csv per seed."""
    def run(seed):
        return pipeline.sample(cfg, seed, unconditional=unconditional, force=force,
                               trajectory_every=trajectory_every)

    for p in pipeline.for_each_seed(cfg, run, parallel):
        click.echo(str(p))


@cli.command()
@experiment_options
@click.option("--tag", help="Design file tag (default: w<w>; 'unconditional' for plain sampling).")
@click.option("--unconditional", is_flag=True)
def evaluate(cfg, parallel, tag, unconditional):
    """Hypervolume and delta-spread per seed; writes report-<tag>.csv."""
    tag = tag or pipeline.design_tag(cfg.guidance.w, unconditional, cfg.classifier.criterion)
    path, scores, base = pipeline.evaluate(cfg, tag=tag)
    hv = [s[0] for s in scores]
    sp = [s[1] for s in scores]
    rep = IndicatorReport(cfg.problem, tag, list(cfg.seeds), hv, sp)
    (hm, hs), (sm, ss) = rep.hv_mean_std, rep.spread_mean_std
    click.echo(f"{cfg.problem} {tag}: hypervolume {hm:.4f} ± {hs:.4f}, delta-spread {sm:.4f} ± {ss:.4f}")
    click.echo(str(path))


@cli.command()
@experiment_options
@click.option("--sweep", type=click.Choice(["w", "criterion"]), default="w", show_default=True)
@click.option("--force", is_flag=True)
def ablate(cfg, parallel, sweep, force):
    """Sweep w over {0,5,10,20,50} or the diversity criterion."""
    click.echo(str(pipeline.ablate(cfg, sweep=sweep, force=force, parallel=parallel)))


@cli.command()
@click.argument("reports", nargs=-1, type=click.Path(dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".", show_default=True)
def report(reports, out_dir):
    """Summary table and average ranks from report CSVs."""
    outputs, reps = pipeline.report(reports, out_dir)
    for r in reps:
        (hm, hs), (sm, ss) = r.hv_mean_std, r.spread_mean_std
        click.echo(f"{r.task} {r.method}: hypervolume {hm:.4f} ± {hs:.4f}, delta-spread {sm:.4f} ± {ss:.4f}")
    for p in outputs:
        click.echo(str(p))


def _error_line(exc):
    return "error: " + json.dumps({"type": type(exc).__name__, "message": str(exc)}, sort_keys=True)


def main(argv=None):
    """Entry point; failures print one ``error: {json}`` line to stderr."""
    try:
        cli.main(args=argv, prog_name="pgdmoo", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo(_error_line(KeyboardInterrupt("aborted")), err=True)
        return 130
    except click.ClickException as exc:
        click.echo(_error_line(exc), err=True)
        return exc.exit_code
    except (PgdMooError, ValueError, KeyError, OSError) as exc:
        click.echo(_error_line(exc), err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
