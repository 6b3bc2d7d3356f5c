"""Hypervolume, Delta-spread, objective normalization and rank aggregation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError

log = logging.getLogger(__name__)

REF_VALUE = 1.1
MC_SAMPLES = 2_000_000


def hypervolume(S, ref, n_samples=MC_SAMPLES, seed=0):
    """Dominated hypervolume of ``S`` w.r.t. ``ref`` (minimization).

    Exact for m <= 3; Monte Carlo estimate for m > 3 (see :func:`hypervolume_mc`).
    Points that do not strictly dominate ``ref`` in every coordinate add nothing.
    """
    S = np.asarray(S, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if S.size == 0:
        return 0.0
    S = S.reshape(-1, ref.shape[0]) if S.ndim == 1 else S
    if S.shape[1] != ref.shape[0]:
        raise ShapeError(f"reference point has {ref.shape[0]} coordinates, points have {S.shape[1]}")
    m = ref.shape[0]
    if m == 1:
        lo = S[:, 0].min()
        return float(max(ref[0] - lo, 0.0))
    if m <= 3:
        # dropping dominated points first makes adding one an exact no-op
        S = S[np.all(S < ref, axis=1)]
        if S.shape[0] == 0:
            return 0.0
        S = S[kernels.front_ranks(S) == 0]
        return float((kernels.hv2d if m == 2 else kernels.hv3d)(S, ref))
    return hypervolume_mc(S, ref, n_samples=n_samples, seed=seed)[0]


def hypervolume_mc(S, ref, n_samples=MC_SAMPLES, seed=0):
    """Monte Carlo hypervolume: uniform samples in the [ideal, ref] box.

    Returns ``(estimate, standard_error)``.
    """
    S = np.asarray(S, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if S.shape[1] != ref.shape[0]:
        raise ShapeError(f"reference point has {ref.shape[0]} coordinates, points have {S.shape[1]}")
    S = S[np.all(S < ref, axis=1)]
    if S.shape[0] == 0:
        return 0.0, 0.0
    S = S[kernels.front_ranks(S) == 0]
    ideal = S.min(axis=0)
    box = float(np.prod(ref - ideal))
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 200_000
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        U = ideal + rng.random((k, ref.shape[0])) * (ref - ideal)
        hits += kernels.count_dominated(U, S)
        done += k
    p = hits / n_samples
    return box * p, box * np.sqrt(p * (1.0 - p) / n_samples)


def nondominated_subset(Y):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] == 0:
        return Y
    return Y[kernels.front_ranks(Y) == 0]


def delta_spread(S, extremes=None):
    """Delta-spread of the non-dominated subset of ``S`` (lower is more uniform).

    Consecutive gaps are Euclidean distances along the first-objective order.
    ``extremes`` are the known Pareto-front extreme points; when omitted the
    extreme-distance term is zero. Returns NaN if fewer than two points remain.
    """
    F = nondominated_subset(S)
    if F.shape[0] < 2:
        return float("nan")
    order = np.lexsort(F.T[::-1])
    F = F[order]
    gaps = np.linalg.norm(np.diff(F, axis=0), axis=1)
    mean_gap = gaps.mean()
    ext = 0.0
    if extremes is not None:
        E = np.atleast_2d(np.asarray(extremes, dtype=np.float64))
        ext = float(sum(np.min(np.linalg.norm(F - e, axis=1)) for e in E))
    denom = ext + (F.shape[0] - 1) * mean_gap
    if denom == 0.0:
        return float("nan")
    return float((ext + np.abs(gaps - mean_gap).sum()) / denom)


def normalize_objectives(Y, y_min, y_max):
    """Map each objective linearly so the dataset range becomes [-1, 1]."""
    Y = np.asarray(Y, dtype=np.float64)
    y_min = np.asarray(y_min, dtype=np.float64)
    y_max = np.asarray(y_max, dtype=np.float64)
    span = y_max - y_min
    flat = span <= 0
    if np.any(flat):
        warnings.warn(
            f"objectives {np.flatnonzero(flat).tolist()} have zero range; mapped to 0",
            RuntimeWarning, stacklevel=2,
        )
    safe = np.where(flat, 1.0, span)
    out = -1.0 + 2.0 * (Y - y_min) / safe
    if np.any(flat):
        out[..., flat] = 0.0
    return out


def reference_point(m):
    return np.full(m, REF_VALUE)


def hv_ceiling_check(hv, m):
    """Soft sanity band for normalized hypervolume.

    2.1**m is the volume reachable by points inside the dataset range;
    results far beyond 2.2**m usually mean the normalization stats are wrong,
    though optimizers that extrapolate past the data can legitimately exceed it.
    Returns True when ``hv`` is within the band's upper edge.
    """
    ok = hv <= 2.2 ** m
    if not ok:
        log.warning("normalized hypervolume %.4f exceeds 2.2^%d = %.4f", hv, m, 2.2 ** m)
    return ok


@dataclass
class IndicatorReport:
    task: str
    method: str
    seeds: list[int]
    hypervolume: list[float]
    spread: list[float]

    @staticmethod
    def _mean_std(vals):
        v = np.asarray([x for x in vals if np.isfinite(x)], dtype=np.float64)
        if v.size == 0:
            return float("nan"), float("nan")
        return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def hv_mean_std(self):
        return self._mean_std(self.hypervolume)

    @property
    def spread_mean_std(self):
        return self._mean_std(self.spread)

    def rows(self):
        for s, hv, sp in zip(self.seeds, self.hypervolume, self.spread):
            yield {"task": self.task, "method": self.method, "seed": s, "metric": "hypervolume", "value": hv}
            yield {"task": self.task, "method": self.method, "seed": s, "metric": "delta_spread", "value": sp}


def _average_ranks(values, higher_is_better):
    """1-based ranks; ties share the mean of the positions they occupy."""
    v = np.asarray(values, dtype=np.float64)
    key = -v if higher_is_better else v
    order = np.argsort(key, kind="stable")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and key[order[j + 1]] == key[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def aggregate(reports):
    """Average rank per method across tasks, for hypervolume (higher is
    better) and Delta-spread (lower is better).

    Returns ``{method: {"hv_rank": float, "spread_rank": float}}``.
    """
    by_task = {}
    for r in reports:
        by_task.setdefault(r.task, []).append(r)
    methods = sorted({r.method for r in reports})
    if len(methods) < 2:
        raise ValueError("rank aggregation needs at least two methods")
    hv_ranks = {m: [] for m in methods}
    sp_ranks = {m: [] for m in methods}
    for task, rs in by_task.items():
        names = [r.method for r in rs]
        hv = _average_ranks([r.hv_mean_std[0] for r in rs], higher_is_better=True)
        sp = _average_ranks([r.spread_mean_std[0] for r in rs], higher_is_better=False)
        for name, a, b in zip(names, hv, sp):
            hv_ranks[name].append(a)
            sp_ranks[name].append(b)
    return {
        m: {"hv_rank": float(np.mean(hv_ranks[m])), "spread_rank": float(np.mean(sp_ranks[m]))}
        for m in methods
    }
