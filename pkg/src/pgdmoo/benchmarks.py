"""ZDT/DTLZ test problems and the offline dataset container.

Designs are kept in raw box coordinates (``X_raw``); the normalized view used
by the networks maps each variable's problem bounds onto [-1, 1].
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import pareto
from .errors import DomainError, EvaluationUnavailable, ParseError

DATASET_FORMAT = 1
TRAIN_FRACTION = 0.9
_BOUND_TOL = 1e-9


# ---------------------------------------------------------------- objectives
# Every evaluator takes an (n, d) array and returns (n, m).

def _zdt_g(X):
    return 1.0 + 9.0 * X[:, 1:].sum(axis=1) / (X.shape[1] - 1)


def zdt1(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    return np.stack([f1, g * (1.0 - np.sqrt(f1 / g))], axis=1)


def zdt2(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    return np.stack([f1, g * (1.0 - (f1 / g) ** 2)], axis=1)


def zdt3(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    h = 1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1)
    return np.stack([f1, g * h], axis=1)


def zdt4(X):
    f1 = X[:, 0]
    rest = X[:, 1:]
    g = 1.0 + 10.0 * rest.shape[1] + np.sum(rest ** 2 - 10.0 * np.cos(4.0 * np.pi * rest), axis=1)
    return np.stack([f1, g * (1.0 - np.sqrt(f1 / g))], axis=1)


def zdt6(X):
    x1 = X[:, 0]
    f1 = 1.0 - np.exp(-4.0 * x1) * np.sin(6.0 * np.pi * x1) ** 6
    g = 1.0 + 9.0 * (X[:, 1:].sum(axis=1) / (X.shape[1] - 1)) ** 0.25
    return np.stack([f1, g * (1.0 - (f1 / g) ** 2)], axis=1)


def _dtlz1_g(Xm):
    k = Xm.shape[1]
    return 100.0 * (k + np.sum((Xm - 0.5) ** 2 - np.cos(20.0 * np.pi * (Xm - 0.5)), axis=1))


def _sphere(theta, g, m):
    """Spherical front mapping shared by DTLZ2-6; ``theta`` holds m-1 angles."""
    n = g.shape[0]
    F = np.empty((n, m))
    for i in range(m):
        f = 1.0 + g
        for j in range(m - 1 - i):
            f = f * np.cos(theta[:, j])
        if i > 0:
            f = f * np.sin(theta[:, m - 1 - i])
        F[:, i] = f
    return F


def _dtlz(m):
    def dtlz1(X):
        g = _dtlz1_g(X[:, m - 1:])
        n = X.shape[0]
        F = np.empty((n, m))
        for i in range(m):
            f = 0.5 * (1.0 + g)
            for j in range(m - 1 - i):
                f = f * X[:, j]
            if i > 0:
                f = f * (1.0 - X[:, m - 1 - i])
            F[:, i] = f
        return F

    def dtlz2(X):
        g = np.sum((X[:, m - 1:] - 0.5) ** 2, axis=1)
        return _sphere(X[:, :m - 1] * np.pi / 2.0, g, m)

    def dtlz3(X):
        g = _dtlz1_g(X[:, m - 1:])
        return _sphere(X[:, :m - 1] * np.pi / 2.0, g, m)

    def dtlz4(X, alpha=100.0):
        g = np.sum((X[:, m - 1:] - 0.5) ** 2, axis=1)
        return _sphere(X[:, :m - 1] ** alpha * np.pi / 2.0, g, m)

    def _degenerate(X, g):
        theta = np.empty((X.shape[0], m - 1))
        theta[:, 0] = X[:, 0] * np.pi / 2.0
        gg = g[:, None]
        theta[:, 1:] = np.pi / (4.0 * (1.0 + gg)) * (1.0 + 2.0 * gg * X[:, 1:m - 1])
        return _sphere(theta, g, m)

    def dtlz5(X):
        return _degenerate(X, np.sum((X[:, m - 1:] - 0.5) ** 2, axis=1))

    def dtlz6(X):
        return _degenerate(X, np.sum(X[:, m - 1:] ** 0.1, axis=1))

    def dtlz7(X):
        k = X.shape[1] - m + 1
        g = 1.0 + 9.0 / k * np.sum(X[:, m - 1:], axis=1)
        F = np.empty((X.shape[0], m))
        F[:, :m - 1] = X[:, :m - 1]
        h = m - np.sum(F[:, :m - 1] / (1.0 + g[:, None]) * (1.0 + np.sin(3.0 * np.pi * F[:, :m - 1])), axis=1)
        F[:, m - 1] = (1.0 + g) * h
        return F

    return {
        "dtlz1": dtlz1, "dtlz2": dtlz2, "dtlz3": dtlz3, "dtlz4": dtlz4,
        "dtlz5": dtlz5, "dtlz6": dtlz6, "dtlz7": dtlz7,
    }


# ZDT3 right end of the last front segment; ZDT6 smallest attainable f1.
_ZDT3_F1_MAX = 0.8518328654
_ZDT6_F1_MIN = 0.2807753191


@dataclass
class Problem:
    name: str
    d: int
    m: int
    lower: np.ndarray
    upper: np.ndarray
    fn: Callable | None = None
    extremes: np.ndarray | None = None  # known Pareto-front extreme points

    @property
    def can_evaluate(self):
        return self.fn is not None

    def evaluate(self, X):
        """Exact objective values for raw designs (single design or batch)."""
        if self.fn is None:
            raise EvaluationUnavailable(
                f"problem {self.name!r} has no analytic evaluator; cannot score designs"
            )
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        if X2.shape[1] != self.d:
            raise DomainError(f"{self.name}: expected {self.d} variables, got {X2.shape[1]}")
        span = self.upper - self.lower
        tol = _BOUND_TOL * np.maximum(span, 1.0)
        if np.any(X2 < self.lower - tol) or np.any(X2 > self.upper + tol) or not np.all(np.isfinite(X2)):
            bad = np.flatnonzero(np.any((X2 < self.lower - tol) | (X2 > self.upper + tol), axis=1))
            raise DomainError(f"{self.name}: designs {bad[:5].tolist()} outside the box bounds")
        Y = self.fn(np.clip(X2, self.lower, self.upper))
        return Y[0] if single else Y


def _zdt_extremes(name):
    if name == "zdt3":
        return np.array([[0.0, 1.0], [_ZDT3_F1_MAX, 1.0 - math.sqrt(_ZDT3_F1_MAX)
                          - _ZDT3_F1_MAX * math.sin(10.0 * math.pi * _ZDT3_F1_MAX)]])
    if name == "zdt6":
        return np.array([[_ZDT6_F1_MIN, 1.0 - _ZDT6_F1_MIN ** 2], [1.0, 0.0]])
    return np.array([[0.0, 1.0], [1.0, 0.0]])


def _dtlz_extremes(name, m):
    if name == "dtlz1":
        return 0.5 * np.eye(m)
    if name in ("dtlz2", "dtlz3", "dtlz4"):
        return np.eye(m)
    if name in ("dtlz5", "dtlz6") and m == 3:
        s = math.sqrt(0.5)
        return np.array([[s, s, 0.0], [0.0, 0.0, 1.0]])
    return None


# (d, m) per task
PROBLEM_DIMS = {
    "zdt1": (30, 2), "zdt2": (30, 2), "zdt3": (30, 2), "zdt4": (10, 2), "zdt6": (10, 2),
    "dtlz1": (7, 3), "dtlz2": (10, 3), "dtlz3": (10, 3), "dtlz4": (10, 3),
    "dtlz5": (10, 3), "dtlz6": (10, 3), "dtlz7": (10, 3),
}


def get_problem(name, d=None, m=None):
    key = name.strip().lower()
    if key not in PROBLEM_DIMS:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_DIMS)}")
    d0, m0 = PROBLEM_DIMS[key]
    d = d or d0
    m = m or m0
    lower = np.zeros(d)
    upper = np.ones(d)
    if key.startswith("zdt"):
        if m != 2:
            raise ValueError("ZDT problems have two objectives")
        fn = {"zdt1": zdt1, "zdt2": zdt2, "zdt3": zdt3, "zdt4": zdt4, "zdt6": zdt6}[key]
        if key == "zdt4":
            lower[1:] = -5.0
            upper[1:] = 5.0
        extremes = _zdt_extremes(key)
    else:
        if d < m:
            raise ValueError(f"{key} needs d >= m")
        fn = _dtlz(m)[key]
        extremes = _dtlz_extremes(key, m)
    return Problem(key, d, m, lower, upper, fn, extremes)


PROBLEMS = tuple(PROBLEM_DIMS)


# ------------------------------------------------------------------- dataset

def normalize_designs(X_raw, lower, upper):
    return 2.0 * (np.asarray(X_raw, dtype=np.float64) - lower) / (upper - lower) - 1.0


def denormalize_designs(X, lower, upper):
    raw = lower + (np.asarray(X, dtype=np.float64) + 1.0) / 2.0 * (upper - lower)
    return np.clip(raw, lower, upper)


def split_indices(n, seed, train_fraction=TRAIN_FRACTION):
    rng = np.random.default_rng([int(seed), 0x5117])
    perm = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass
class OfflineDataset:
    X_raw: np.ndarray
    Y: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    y_min: np.ndarray
    y_max: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    problem_name: str = "external"
    seed: int = 0
    fronts: pareto.FrontAssignment | None = None
    _X: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self):
        return self.X_raw.shape[0]

    @property
    def d(self):
        return self.X_raw.shape[1]

    @property
    def m(self):
        return self.Y.shape[1]

    @property
    def X(self):
        if self._X is None:
            self._X = normalize_designs(self.X_raw, self.lower, self.upper)
        return self._X

    def normalize(self, X_raw):
        return normalize_designs(X_raw, self.lower, self.upper)

    def denormalize(self, X):
        return denormalize_designs(X, self.lower, self.upper)

    def annotate(self):
        if self.fronts is None:
            self.fronts = pareto.nondominated_sort(self.Y)
        return self.fronts

    def problem(self):
        """The analytic problem, or a non-evaluating stub for external data."""
        if self.problem_name in PROBLEM_DIMS:
            p = get_problem(self.problem_name, self.d, self.m)
            if p.d == self.d and p.m == self.m:
                return p
        return Problem(self.problem_name, self.d, self.m, self.lower.copy(), self.upper.copy())

    def subset(self, idx, seed=None):
        """Rows ``idx`` with normalization stats kept and a fresh split."""
        idx = np.asarray(idx)
        seed = self.seed if seed is None else seed
        tr, va = split_indices(idx.size, seed)
        return OfflineDataset(
            self.X_raw[idx].copy(), self.Y[idx].copy(), self.lower.copy(), self.upper.copy(),
            self.y_min.copy(), self.y_max.copy(), tr, va, self.problem_name, seed,
        )

    def metadata(self):
        return {
            "format_version": DATASET_FORMAT,
            "problem": self.problem_name,
            "d": self.d,
            "m": self.m,
            "seed": self.seed,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "y_min": self.y_min.tolist(),
            "y_max": self.y_max.tolist(),
            "train_idx": self.train_idx.tolist(),
            "val_idx": self.val_idx.tolist(),
        }


def generate_dataset(problem, N=5000, seed=0):
    """Uniform designs in the box, evaluated exactly, with a 90/10 split."""
    if isinstance(problem, str):
        problem = get_problem(problem)
    if N < 100:
        raise ValueError(f"need N >= 100, got {N}")
    rng = np.random.default_rng(seed)
    X_raw = problem.lower + rng.random((N, problem.d)) * (problem.upper - problem.lower)
    Y = problem.evaluate(X_raw)
    tr, va = split_indices(N, seed)
    ds = OfflineDataset(
        X_raw, Y, problem.lower.copy(), problem.upper.copy(), Y.min(axis=0), Y.max(axis=0),
        tr, va, problem.name, int(seed),
    )
    ds.annotate()
    return ds


def prune_top_fraction(dataset, fraction):
    """Keep the best ``ceil(fraction * N)`` points by front order (boundary
    front trimmed by descending crowding distance). Normalization stats are
    kept; the split and front annotations are recomputed."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    fronts = dataset.annotate()
    if fraction == 1.0:
        return dataset
    keep = pareto.top_fraction_indices(fronts, fraction)
    out = dataset.subset(keep)
    out.annotate()
    return out


# ------------------------------------------------------------------- file IO

def _fmt(v):
    return format(float(v), ".17g")


def meta_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def save_dataset(dataset, path, annotations=False):
    """CSV (x0.., y0.. [, front, crowding]) plus a ``.meta.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"x{i}" for i in range(dataset.d)] + [f"y{j}" for j in range(dataset.m)]
    if annotations:
        fr = dataset.annotate()
        header += ["front", "crowding"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.N):
            row = [_fmt(v) for v in dataset.X_raw[i]] + [_fmt(v) for v in dataset.Y[i]]
            if annotations:
                row += [str(int(fr.front[i])), "inf" if np.isinf(fr.crowding[i]) else _fmt(fr.crowding[i])]
            w.writerow(row)
    with open(meta_path(path), "w") as fh:
        json.dump(dataset.metadata(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _parse_header(header):
    xs, ys, extra = [], [], []
    for pos, name in enumerate(header):
        name = name.strip()
        if name[:1] == "x" and name[1:].isdigit():
            xs.append((int(name[1:]), pos))
        elif name[:1] == "y" and name[1:].isdigit():
            ys.append((int(name[1:]), pos))
        elif name in ("front", "crowding"):
            extra.append(name)
        else:
            raise ParseError(f"unexpected column {name!r}", line=1)
    if not xs or not ys:
        raise ParseError("header must contain x0.. and y0.. columns", line=1)
    for cols, letter in ((xs, "x"), (ys, "y")):
        if [c for c, _ in cols] != list(range(len(cols))):
            raise ParseError(f"{letter} columns must be numbered 0..{len(cols) - 1} in order", line=1)
    if xs[-1][1] > ys[0][1]:
        raise ParseError("x columns must precede y columns", line=1)
    return len(xs), len(ys), len(header)


def load_dataset(path):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        d, m, width = _parse_header(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields (d={d}, m={m}), found {len(row)}", line=lineno)
            try:
                rows.append([float(v) for v in row[:d + m]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not rows:
        raise ParseError("no data rows", line=2)
    data = np.asarray(rows, dtype=np.float64)
    X_raw, Y = data[:, :d], data[:, d:]
    mp = meta_path(path)
    if mp.exists():
        with open(mp) as fh:
            meta = json.load(fh)
        if meta.get("d") != d or meta.get("m") != m:
            raise ParseError(f"sidecar says d={meta.get('d')}, m={meta.get('m')}; CSV has d={d}, m={m}")
        ds = OfflineDataset(
            X_raw, Y, np.asarray(meta["lower"], dtype=np.float64), np.asarray(meta["upper"], dtype=np.float64),
            np.asarray(meta["y_min"], dtype=np.float64), np.asarray(meta["y_max"], dtype=np.float64),
            np.asarray(meta["train_idx"], dtype=np.int64), np.asarray(meta["val_idx"], dtype=np.int64),
            meta.get("problem", "external"), int(meta.get("seed", 0)),
        )
    else:
        lo, hi = X_raw.min(axis=0), X_raw.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        tr, va = split_indices(X_raw.shape[0], 0)
        ds = OfflineDataset(X_raw, Y, lo, hi, Y.min(axis=0), Y.max(axis=0), tr, va, "external", 0)
    ds.annotate()
    return ds
