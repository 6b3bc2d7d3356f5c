"""Pure numpy fallback for the hot kernels in ``_kernels.pyx``.

Both modules expose the same four functions with identical semantics;
``pgdmoo.kernels`` picks one at import time.
"""

import numpy as np

_CHUNK = 1024


def front_ranks(Y):
    """Front index per row of ``Y`` (0 = non-dominated), minimization."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n = Y.shape[0]
    ranks = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return ranks
    # dom[i, j]: row i dominates row j
    dom = np.empty((n, n), dtype=bool)
    for s in range(0, n, _CHUNK):
        A = Y[s:s + _CHUNK, None, :]
        le = np.all(A <= Y[None, :, :], axis=2)
        lt = np.any(A < Y[None, :, :], axis=2)
        dom[s:s + _CHUNK] = le & lt
    count = dom.sum(axis=0).astype(np.int64)
    current = np.flatnonzero(count == 0)
    k = 0
    while current.size:
        ranks[current] = k
        count[current] = -1
        count -= dom[current].sum(axis=0)
        current = np.flatnonzero(count == 0)
        k += 1
    return ranks


def hv2d(points, ref):
    P = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    r0, r1 = float(ref[0]), float(ref[1])
    P = P[(P[:, 0] < r0) & (P[:, 1] < r1)]
    if P.shape[0] == 0:
        return 0.0
    order = np.lexsort((P[:, 1], P[:, 0]))
    hv = 0.0
    prev = r1
    for i in order:
        f1, f2 = P[i]
        if f2 < prev:
            hv += (r0 - f1) * (prev - f2)
            prev = f2
    return hv


def hv3d(points, ref):
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    P = P[np.all(P < np.asarray(ref, dtype=np.float64)[None, :], axis=1)]
    n = P.shape[0]
    if n == 0:
        return 0.0
    P = P[np.argsort(P[:, 2], kind="stable")]
    hv = 0.0
    for k in range(n):
        upper = P[k + 1, 2] if k + 1 < n else ref[2]
        depth = upper - P[k, 2]
        if depth > 0.0:
            hv += depth * hv2d(P[:k + 1, :2], ref[:2])
    return hv


def count_dominated(samples, points):
    """Number of rows of ``samples`` weakly dominated by some row of ``points``."""
    S = np.asarray(samples, dtype=np.float64)
    P = np.asarray(points, dtype=np.float64)
    total = 0
    for s in range(0, S.shape[0], _CHUNK):
        block = S[s:s + _CHUNK]
        hit = np.any(np.all(P[None, :, :] <= block[:, None, :], axis=2), axis=1)
        total += int(hit.sum())
    return total
