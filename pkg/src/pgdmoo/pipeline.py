"""File-level experiment stages shared by the CLI and the acceptance suite.

Layout under ``<output_dir>/<problem>/``::

    seed<k>/dataset.csv (+ .meta.json)
    seed<k>/denoiser.npz, denoiser_log.csv
    seed<k>/classifier-<criterion>.npz, classifier-<criterion>_log.csv
    seed<k>/designs-<tag>.csv, trajectory-<tag>.csv
    seed<k>/manifest-<stage>.json
    report-<tag>.csv, ablate-<sweep>.csv, summary.csv, ranks.csv
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, benchmarks, kernels, metrics, nn, pareto
from .config import ORIGINS, ExperimentConfig, flat_keys
from .diffusion import DenoiserConfig, linear_schedule, train_denoiser
from .errors import ConfigurationError, PgdMooError
from .preference import ClassifierConfig, train_preference
from .sampler import GuidanceConfig, guided_sample, run_chains, sample_trajectory_probe, select_reference

log = logging.getLogger(__name__)

W_SWEEP = (0.0, 5.0, 10.0, 20.0, 50.0)
CRITERION_SWEEP = ("Crowding", "HypervolumeImprovement", "None")


class MissingInputError(PgdMooError, FileNotFoundError):
    """A stage's input file (dataset, checkpoint, designs) does not exist."""


class StaleCheckpointError(PgdMooError):
    """A checkpoint was trained under a different configuration."""


# ------------------------------------------------------------------ helpers

def stage_seed(seed, stage):
    # fixed offsets keep the dataset, both trainings and sampling on separate streams
    return 1000 * int(seed) + {"denoiser": 1, "classifier": 2, "sample": 3}[stage]


def task_dir(cfg):
    return Path(cfg.output_dir) / cfg.problem


def seed_dir(cfg, seed):
    return task_dir(cfg) / f"seed{seed}"


def criterion_slug(criterion):
    return pareto.DiversityCriterion.parse(criterion).value.lower()


def design_tag(w=None, unconditional=False, criterion=None):
    """``w10``, ``unconditional``, or ``none-w10`` for a non-default criterion."""
    if unconditional:
        return "unconditional"
    tag = f"w{float(w):g}"
    if criterion is not None and criterion_slug(criterion) != "crowding":
        tag = f"{criterion_slug(criterion)}-{tag}"
    return tag


def _require(path):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing input file: {path}")
    return path


def _fmt(v):
    return format(float(v), ".17g")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions():
    return {
        "pgdmoo": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "kernels": kernels.BACKEND_NAME,
    }


def origins(cfg):
    default = ExperimentConfig().to_dict()
    current = cfg.to_dict()
    out = {}
    for key in flat_keys(current):
        node_c, node_d = current, default
        for part in key.split("."):
            node_c, node_d = node_c[part], node_d[part]
        out[key] = ORIGINS.get(key, "decision") if node_c == node_d else "override"
    return out


def write_manifest(cfg, stage, seed, outputs, extra=None):
    """Record config, hashes, versions and output digests next to the outputs."""
    d = seed_dir(cfg, seed) if seed is not None else task_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    man = {
        "stage": stage,
        "seed": seed,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "denoiser_hash": cfg.denoiser_hash(),
        "classifier_hash": cfg.classifier_hash(),
        "origins": origins(cfg),
        "versions": versions(),
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        man.update(extra)
    path = d / f"manifest-{stage}.json"
    path.write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")
    return path


def for_each_seed(cfg, fn, parallel=False):
    if parallel and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(len(cfg.seeds)) as ex:
            return list(ex.map(fn, cfg.seeds))
    return [fn(s) for s in cfg.seeds]


def schedule(cfg):
    return linear_schedule(cfg.diffusion.T, cfg.diffusion.beta_start, cfg.diffusion.beta_end)


# ------------------------------------------------------------------- stages

def gen_data(cfg, seed):
    path = seed_dir(cfg, seed) / "dataset.csv"
    ds = benchmarks.generate_dataset(cfg.problem, N=cfg.N, seed=seed)
    benchmarks.save_dataset(ds, path, annotations=True)
    write_manifest(cfg, "gen-data", seed, [path, benchmarks.meta_path(path)])
    return path


def load_seed_dataset(cfg, seed):
    return benchmarks.load_dataset(_require(seed_dir(cfg, seed) / "dataset.csv"))


def _write_history(path, history):
    keys = list(history[0]) if history else ["epoch"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for h in history:
            w.writerow([h[k] if k == "epoch" else _fmt(h[k]) for k in keys])


def train_denoiser_stage(cfg, seed, dataset=None):
    ds = dataset if dataset is not None else load_seed_dataset(cfg, seed)
    dc = cfg.diffusion
    dcfg = DenoiserConfig(hidden=dc.hidden, emb_dim=dc.emb_dim, epochs=dc.epochs, lr=dc.lr,
                          weight_decay=dc.weight_decay, batch_size=dc.batch_size)
    res = train_denoiser(ds.X, schedule(cfg), dcfg, seed=stage_seed(seed, "denoiser"),
                         train_idx=ds.train_idx, val_idx=ds.val_idx)
    d = seed_dir(cfg, seed)
    ck = nn.save_checkpoint(d / "denoiser.npz", res.model, meta={
        "stage_hash": cfg.denoiser_hash(), "best_epoch": res.best_epoch, "seed": seed})
    logp = d / "denoiser_log.csv"
    _write_history(logp, res.history)
    return ck, logp, res


def train_classifier_stage(cfg, seed, dataset=None):
    ds = dataset if dataset is not None else load_seed_dataset(cfg, seed)
    cc = cfg.classifier
    pruned = benchmarks.prune_top_fraction(ds, cc.prune_fraction)
    ccfg = ClassifierConfig(epochs=cc.epochs, lr=cc.lr, batch_size=cc.batch_size,
                            emb_dim=cfg.diffusion.emb_dim, wide_units=cc.wide_units, val_pairs=cc.val_pairs)
    res = train_preference(pruned, schedule(cfg), cc.criterion, ccfg, seed=stage_seed(seed, "classifier"))
    d = seed_dir(cfg, seed)
    slug = criterion_slug(cc.criterion)
    ck = nn.save_checkpoint(d / f"classifier-{slug}.npz", res.model, meta={
        "stage_hash": cfg.classifier_hash(), "best_epoch": res.best_epoch, "seed": seed,
        "criterion": res.criterion.value, "train_points": pruned.N})
    logp = d / f"classifier-{slug}_log.csv"
    _write_history(logp, res.history)
    return ck, logp, res


def train(cfg, seed, denoiser=True, classifier=True):
    ds = load_seed_dataset(cfg, seed)
    outputs = []
    if denoiser:
        outputs += train_denoiser_stage(cfg, seed, ds)[:2]
    if classifier:
        outputs += train_classifier_stage(cfg, seed, ds)[:2]
    write_manifest(cfg, "train", seed, outputs)
    return outputs


def _load_checked(path, expected, force):
    model, meta = nn.load_checkpoint(_require(path))
    got = meta.get("stage_hash")
    if got != expected:
        msg = f"{path} was trained under config hash {got}, current config gives {expected}"
        if not force:
            raise StaleCheckpointError(msg + "; retrain or pass --force")
        log.warning("%s (continuing because of --force)", msg)
    return model


def _write_designs(path, raw, Y, chain_ids, seed):
    d = raw.shape[1]
    m = 0 if Y is None else Y.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(d)] + [f"y{j}" for j in range(m)] + ["chain", "seed"])
        for k in range(raw.shape[0]):
            row = [_fmt(v) for v in raw[k]]
            if m:
                row += [_fmt(v) for v in Y[k]]
            w.writerow(row + [str(int(chain_ids[k])), str(seed)])


def sample(cfg, seed, w=None, unconditional=False, force=False, trajectory_every=None, tag=None):
    """Write ``designs-<tag>.csv`` (raw designs, exact objectives, chain, seed)."""
    ds = load_seed_dataset(cfg, seed)
    sd = seed_dir(cfg, seed)
    sched = schedule(cfg)
    den = _load_checked(sd / "denoiser.npz", cfg.denoiser_hash(), force)
    w = cfg.guidance.w if w is None else float(w)
    tag = tag or design_tag(w, unconditional, cfg.classifier.criterion)
    s_seed = stage_seed(seed, "sample")
    rows = None
    if unconditional:
        res = run_chains(den, sched, cfg.guidance.n, s_seed, classifier=None)
    else:
        slug = criterion_slug(cfg.classifier.criterion)
        cls = _load_checked(sd / f"classifier-{slug}.npz", cfg.classifier_hash(), force)
        gcfg = GuidanceConfig(w=w, mode=cfg.classifier.gradient_mode, n=cfg.guidance.n, seed=s_seed,
                              max_grad_norm=cfg.guidance.max_grad_norm)
        if trajectory_every:
            res, rows = sample_trajectory_probe(den, cls, sched, ds, gcfg, every=trajectory_every)
        else:
            res = guided_sample(den, cls, sched, ds, gcfg, reference=select_reference(ds))
    raw = ds.denormalize(res.designs)
    problem = ds.problem()
    Y = problem.evaluate(raw) if problem.can_evaluate else None
    out = sd / f"designs-{tag}.csv"
    _write_designs(out, raw, Y, res.chain_ids, seed)
    outputs = [out]
    if rows is not None:
        tp = sd / f"trajectory-{tag}.csv"
        with open(tp, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["step", "chain"] + [f"x{i}" for i in range(ds.d)] + [f"y{j}" for j in range(ds.m)])
            for step, chain, xr, y in rows:
                wr.writerow([step, chain] + [_fmt(v) for v in xr] + [_fmt(v) for v in y])
        outputs.append(tp)
    write_manifest(cfg, f"sample-{tag}", seed, outputs, extra={
        "w": w, "unconditional": unconditional, "aborted_chains": res.aborted.tolist(),
        "max_guidance_shift": res.max_shift})
    return out


def read_designs(path, dataset):
    """Objective rows of a design CSV (re-evaluated if the file lacks them)."""
    path = _require(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=np.float64)
    xs = [i for i, h in enumerate(header) if h.startswith("x")]
    ys = [i for i, h in enumerate(header) if h.startswith("y")]
    if data.size == 0:
        return np.zeros((0, len(xs))), np.zeros((0, dataset.m))
    X = data[:, xs]
    Y = data[:, ys] if ys else dataset.problem().evaluate(X)
    return X, Y


def score(Y, dataset):
    """(hypervolume, delta-spread) in the dataset's normalized objective space."""
    Yn = metrics.normalize_objectives(Y, dataset.y_min, dataset.y_max)
    hv = metrics.hypervolume(Yn, metrics.reference_point(dataset.m))
    ext = dataset.problem().extremes
    if ext is not None:
        ext = metrics.normalize_objectives(ext, dataset.y_min, dataset.y_max)
    return hv, metrics.delta_spread(Yn, ext)


def dataset_front_score(dataset):
    fr = dataset.annotate()
    return score(dataset.Y[fr.front == 0], dataset)


def _report_rows(cfg, method, scores):
    for seed, (hv, sp) in zip(cfg.seeds, scores):
        yield [cfg.problem, method, seed, "hypervolume", _fmt(hv)]
        yield [cfg.problem, method, seed, "delta_spread", _fmt(sp)]


def _write_rows(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


REPORT_HEADER = ["task", "method", "seed", "metric", "value"]


def evaluate(cfg, tag=None, method=None, include_dataset=True):
    """Score ``designs-<tag>.csv`` for every seed; write ``report-<tag>.csv``."""
    tag = tag or design_tag(cfg.guidance.w, criterion=cfg.classifier.criterion)
    scores, base = [], []
    for seed in cfg.seeds:
        ds = load_seed_dataset(cfg, seed)
        _, Y = read_designs(seed_dir(cfg, seed) / f"designs-{tag}.csv", ds)
        scores.append(score(Y, ds))
        base.append(dataset_front_score(ds))
    rows = list(_report_rows(cfg, method or tag, scores))
    if include_dataset:
        rows += list(_report_rows(cfg, "dataset", base))
    path = _write_rows(task_dir(cfg) / f"report-{tag}.csv", REPORT_HEADER, rows)
    write_manifest(cfg, f"evaluate-{tag}", None, [path])
    return path, scores, base


def ablate(cfg, sweep="w", force=False, parallel=False):
    """Guidance-weight or diversity-criterion sweep; one row per (value, seed)."""
    rows = []
    if sweep == "w":
        def run(seed):
            out = []
            for w in W_SWEEP:
                ds = load_seed_dataset(cfg, seed)
                p = sample(cfg, seed, w=w, force=force)
                out.append([cfg.problem, f"{w:g}", seed, *map(_fmt, score(read_designs(p, ds)[1], ds))])
            return out
    elif sweep == "criterion":
        def run(seed):
            out = []
            for crit in CRITERION_SWEEP:
                c = cfg.with_overrides({"classifier.criterion": crit})
                ds = load_seed_dataset(c, seed)
                slug = criterion_slug(crit)
                if not (seed_dir(c, seed) / f"classifier-{slug}.npz").exists():
                    train_classifier_stage(c, seed, ds)
                p = sample(c, seed, force=force, tag=design_tag(c.guidance.w, criterion=crit))
                out.append([cfg.problem, crit, seed, *map(_fmt, score(read_designs(p, ds)[1], ds))])
            return out
    else:
        raise ConfigurationError(f"unknown sweep {sweep!r}; use 'w' or 'criterion'")
    for part in for_each_seed(cfg, run, parallel):
        rows += part
    order = (lambda v: float(v)) if sweep == "w" else CRITERION_SWEEP.index
    rows.sort(key=lambda r: (order(r[1]), r[2]))
    path = _write_rows(task_dir(cfg) / f"ablate-{sweep}.csv",
                       ["task", sweep, "seed", "hypervolume", "delta_spread"], rows)
    write_manifest(cfg, f"ablate-{sweep}", None, [path])
    return path


def read_report(path):
    reports = {}
    with open(_require(path), newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["task"], row["method"])
            rep = reports.setdefault(key, {"seeds": [], "hypervolume": {}, "delta_spread": {}})
            seed = int(row["seed"])
            if seed not in rep["seeds"]:
                rep["seeds"].append(seed)
            rep[row["metric"]][seed] = float(row["value"])
    out = []
    for (task, method), rep in reports.items():
        seeds = rep["seeds"]
        out.append(metrics.IndicatorReport(task, method, seeds,
                                           [rep["hypervolume"][s] for s in seeds],
                                           [rep["delta_spread"][s] for s in seeds]))
    return out


def report(paths, out_dir):
    """Summary table (mean and std per task/method) and average ranks."""
    reports = []
    seen = set()
    for p in paths:
        for r in read_report(p):
            if (r.task, r.method) in seen:
                continue
            seen.add((r.task, r.method))
            reports.append(r)
    reports.sort(key=lambda r: (r.task, r.method))
    out_dir = Path(out_dir)
    summary = []
    for r in reports:
        hm, hs = r.hv_mean_std
        sm, ss = r.spread_mean_std
        summary.append([r.task, r.method, len(r.seeds), _fmt(hm), _fmt(hs), _fmt(sm), _fmt(ss)])
    sp = _write_rows(out_dir / "summary.csv",
                     ["task", "method", "n_seeds", "hv_mean", "hv_std", "spread_mean", "spread_std"], summary)
    outputs = [sp]
    methods = {r.method for r in reports}
    if len(methods) >= 2:
        ranks = metrics.aggregate(reports)
        rp = _write_rows(out_dir / "ranks.csv", ["method", "hv_rank", "spread_rank"],
                         [[m, _fmt(v["hv_rank"]), _fmt(v["spread_rank"])] for m, v in sorted(ranks.items())])
        outputs.append(rp)
    return outputs, reports
