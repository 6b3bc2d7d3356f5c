"""Pareto dominance, non-dominated sorting, crowding distance and the
diversity-aware pair labeling used to train the preference classifier.

All objectives are minimized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError


class DiversityCriterion(str, enum.Enum):
    CROWDING = "crowding"
    HYPERVOLUME = "hypervolume"
    NONE = "none"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "crowding": cls.CROWDING,
            "hypervolume": cls.HYPERVOLUME,
            "hypervolumeimprovement": cls.HYPERVOLUME,
            "hv": cls.HYPERVOLUME,
            "none": cls.NONE,
            "nodiversity": cls.NONE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown diversity criterion {value!r}") from None


def dominates(ya, yb):
    ya = np.asarray(ya, dtype=np.float64)
    yb = np.asarray(yb, dtype=np.float64)
    if ya.shape != yb.shape:
        raise ShapeError(f"objective vectors differ in length: {ya.shape} vs {yb.shape}")
    return bool(np.all(ya <= yb) and np.any(ya < yb))


def nondominated_mask(Y):
    Y = np.asarray(Y, dtype=np.float64)
    return kernels.front_ranks(Y) == 0


@dataclass
class FrontAssignment:
    front: np.ndarray  # int64, 0 = non-dominated
    crowding: np.ndarray  # float64, +inf for front extremes

    def members(self, k):
        return np.flatnonzero(self.front == k)

    @property
    def n_fronts(self):
        return int(self.front.max()) + 1 if self.front.size else 0


def nondominated_sort(Y):
    """Front index per point plus crowding distance within each front."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ShapeError(f"expected (n, m) objective array, got shape {Y.shape}")
    front = kernels.front_ranks(Y)
    crowd = np.zeros(Y.shape[0])
    for k in range(int(front.max()) + 1 if front.size else 0):
        idx = np.flatnonzero(front == k)
        crowd[idx] = crowding_distance(Y[idx])
    return FrontAssignment(front, crowd)


def crowding_distance(F):
    """Sum over objectives of (next - previous) / (max - min) in per-objective
    sorted order. Boundary points get +inf; an objective with zero range
    contributes nothing."""
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if n <= 2:
        return np.full(n, np.inf)
    d = np.zeros(n)
    for i in range(F.shape[1]):
        col = F[:, i]
        order = np.argsort(col, kind="stable")
        span = col[order[-1]] - col[order[0]]
        if span <= 0.0:
            continue
        d[order[0]] = np.inf
        d[order[-1]] = np.inf
        d[order[1:-1]] += (col[order[2:]] - col[order[:-2]]) / span
    return d


def hv_contributions(F, ref):
    """Exclusive hypervolume of each point: HV(F) - HV(F without that point)."""
    from .metrics import hypervolume

    F = np.asarray(F, dtype=np.float64)
    total = hypervolume(F, ref)
    out = np.empty(F.shape[0])
    keep = np.ones(F.shape[0], dtype=bool)
    for i in range(F.shape[0]):
        keep[i] = False
        out[i] = total - hypervolume(F[keep], ref)
        keep[i] = True
    return np.maximum(out, 0.0)


def hv_improvement_score(index, front_Y, ref):
    from .metrics import hypervolume

    F = np.asarray(front_Y, dtype=np.float64)
    rest = np.delete(F, index, axis=0)
    return max(hypervolume(F, ref) - hypervolume(rest, ref), 0.0)


def diversity_scores(Y, fronts, criterion, ref=None):
    """Per-point diversity score within its own front, or ``None`` for NONE."""
    criterion = DiversityCriterion.parse(criterion)
    if criterion is DiversityCriterion.NONE:
        return None
    if criterion is DiversityCriterion.CROWDING:
        return fronts.crowding.copy()
    Y = np.asarray(Y, dtype=np.float64)
    if ref is None:
        ref = Y.max(axis=0) + 0.1 * np.maximum(np.ptp(Y, axis=0), 1e-12)
    scores = np.zeros(Y.shape[0])
    for k in range(fronts.n_fronts):
        idx = fronts.members(k)
        scores[idx] = hv_contributions(Y[idx], ref)
    return scores


SKIP = -1


def label_pairs(a, b, front, scores=None):
    """Vectorized pair labels: 1 if ``a`` is preferred, 0 if ``b`` is, ``SKIP`` otherwise.

    Lower front wins; within a front the higher diversity score wins. Equal
    scores (including two +inf) or ``scores is None`` skip the pair.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    fa, fb = front[a], front[b]
    labels = np.full(a.shape, SKIP, dtype=np.int64)
    labels[fa < fb] = 1
    labels[fa > fb] = 0
    same = (fa == fb) & (a != b)
    if scores is not None:
        sa, sb = scores[a], scores[b]
        labels[same & (sa > sb)] = 1
        labels[same & (sa < sb)] = 0
    labels[a == b] = SKIP
    return labels


@dataclass(frozen=True)
class PreferencePair:
    a: int
    b: int
    label: int
    provenance: str  # "dominance" or "diversity"


def label_pair(a, b, fronts, criterion=DiversityCriterion.CROWDING, scores=None):
    """Label one pair, or return ``None`` when it must be skipped.

    ``scores`` defaults to the crowding distances in ``fronts``; pass precomputed
    hypervolume-improvement scores for that criterion.
    """
    criterion = DiversityCriterion.parse(criterion)
    if a == b:
        return None
    if criterion is DiversityCriterion.NONE:
        scores = None
    elif scores is None:
        if criterion is DiversityCriterion.HYPERVOLUME:
            raise ValueError("hypervolume criterion needs precomputed scores")
        scores = fronts.crowding
    lab = int(label_pairs(np.array([a]), np.array([b]), fronts.front, scores)[0])
    if lab == SKIP:
        return None
    tag = "dominance" if fronts.front[a] != fronts.front[b] else "diversity"
    return PreferencePair(int(a), int(b), lab, tag)


def top_fraction_indices(fronts, fraction):
    """Indices of the best ``ceil(fraction * N)`` points: whole fronts in order,
    the boundary front trimmed by descending crowding distance (then index)."""
    n = fronts.front.size
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    keep = int(np.ceil(fraction * n - 1e-9))
    keep = min(max(keep, 1), n)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(n), -fronts.crowding, fronts.front))
    return np.sort(order[:keep])
