# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: non-dominated ranking, exact 2-D/3-D hypervolume and
Monte-Carlo dominance counting. Semantics match ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline bint _dominates(const double[:, ::1] Y, Py_ssize_t a, Py_ssize_t b,
                            Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    cdef bint strict = False
    for k in range(m):
        if Y[a, k] > Y[b, k]:
            return False
        if Y[a, k] < Y[b, k]:
            strict = True
    return strict


def front_ranks(Y_in):
    cdef const double[:, ::1] Y = np.ascontiguousarray(Y_in, dtype=np.float64)
    cdef Py_ssize_t n = Y.shape[0], m = Y.shape[1]
    ranks_arr = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return ranks_arr
    cdef cnp.int64_t[::1] ranks = ranks_arr
    dom_arr = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] dom = dom_arr
    cdef cnp.int64_t[::1] count = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cur = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] nxt = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i, j, p, q, ncur = 0, nnext
    cdef cnp.int64_t k = 0

    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if _dominates(Y, i, j, m):
                    dom[i, j] = 1
                    count[j] += 1
                elif _dominates(Y, j, i, m):
                    dom[j, i] = 1
                    count[i] += 1
        for i in range(n):
            if count[i] == 0:
                cur[ncur] = i
                ncur += 1
        while ncur > 0:
            nnext = 0
            for p in range(ncur):
                ranks[cur[p]] = k
            for p in range(ncur):
                i = cur[p]
                for q in range(n):
                    if dom[i, q]:
                        count[q] -= 1
                        if count[q] == 0:
                            nxt[nnext] = q
                            nnext += 1
            # keep front members in index order, like the numpy fallback
            for p in range(nnext):
                cur[p] = nxt[p]
            ncur = nnext
            _isort(&cur[0], ncur)
            k += 1
    return ranks_arr


cdef void _isort(cnp.int64_t* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef cnp.int64_t v
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


cdef double _sweep2d(double* xs, double* ys, Py_ssize_t n, double r0, double r1) noexcept nogil:
    # xs ascending (ties by ys ascending)
    cdef double hv = 0.0, prev = r1
    cdef Py_ssize_t i
    for i in range(n):
        if ys[i] < prev:
            hv += (r0 - xs[i]) * (prev - ys[i])
            prev = ys[i]
    return hv


def hv2d(points, ref):
    P = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cdef double r0 = float(ref[0]), r1 = float(ref[1])
    P = P[(P[:, 0] < r0) & (P[:, 1] < r1)]
    if P.shape[0] == 0:
        return 0.0
    P = np.ascontiguousarray(P[np.lexsort((P[:, 1], P[:, 0]))])
    cdef double[::1] xs = np.ascontiguousarray(P[:, 0])
    cdef double[::1] ys = np.ascontiguousarray(P[:, 1])
    return _sweep2d(&xs[0], &ys[0], xs.shape[0], r0, r1)


def hv3d(points, ref):
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    R = np.asarray(ref, dtype=np.float64)
    P = P[np.all(P < R[None, :], axis=1)]
    cdef Py_ssize_t n = P.shape[0]
    if n == 0:
        return 0.0
    P = np.ascontiguousarray(P[np.argsort(P[:, 2], kind="stable")])
    cdef const double[:, ::1] Q = P
    cdef double r0 = R[0], r1 = R[1], r2 = R[2]
    cdef double* xs = <double*> malloc(n * sizeof(double))
    cdef double* ys = <double*> malloc(n * sizeof(double))
    if xs == NULL or ys == NULL:
        free(xs); free(ys)
        raise MemoryError()
    cdef Py_ssize_t k, j, cnt = 0
    cdef double hv = 0.0, upper, depth, x, y
    with nogil:
        for k in range(n):
            # insert (x, y) keeping (xs, ys) lexicographically sorted
            x = Q[k, 0]
            y = Q[k, 1]
            j = cnt - 1
            while j >= 0 and (xs[j] > x or (xs[j] == x and ys[j] > y)):
                xs[j + 1] = xs[j]
                ys[j + 1] = ys[j]
                j -= 1
            xs[j + 1] = x
            ys[j + 1] = y
            cnt += 1
            upper = Q[k + 1, 2] if k + 1 < n else r2
            depth = upper - Q[k, 2]
            if depth > 0.0:
                hv += depth * _sweep2d(xs, ys, cnt, r0, r1)
    free(xs)
    free(ys)
    return hv


def count_dominated(samples, points):
    cdef const double[:, ::1] S = np.ascontiguousarray(samples, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t ns = S.shape[0], npt = P.shape[0], m = S.shape[1]
    cdef Py_ssize_t s, p, k
    cdef long total = 0
    cdef bint ok
    with nogil:
        for s in range(ns):
            for p in range(npt):
                ok = True
                for k in range(m):
                    if P[p, k] > S[s, k]:
                        ok = False
                        break
                if ok:
                    total += 1
                    break
    return int(total)
