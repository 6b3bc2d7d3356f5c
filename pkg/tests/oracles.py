"""Independent reference implementations used only by the tests.

Written plainly (loops, scalar math) so they share no code paths with the
package they check.
"""

import math

import numpy as np


# --------------------------------------------------------------------- MLP

def mlp_forward_loops(params, arch, x, t):
    """Per-scalar evaluation of the package's MLP for a single input vector."""
    hidden = arch["hidden"]
    emb_dim = arch["emb_dim"]
    norm = arch["layer_norm"]
    acts = arch["activations"]
    emb = []
    for k in range(emb_dim // 2):
        f = 10000.0 ** (-(2.0 * k) / emb_dim)
        emb.append(math.sin(t * f))
        emb.append(math.cos(t * f))
    a = [float(v) for v in x]
    for k in range(len(hidden)):
        W, b = params[f"W{k}"], params[f"b{k}"]
        z = []
        for i in range(W.shape[0]):
            s = float(b[i])
            for j in range(W.shape[1]):
                s += float(W[i, j]) * a[j]
            if k == 0 and emb_dim:
                for j in range(emb_dim):
                    s += float(params["Wt"][i, j]) * emb[j]
            z.append(s)
        h = [max(v, 0.0) for v in z] if acts[k] == "relu" else z
        if norm[k]:
            mu = sum(h) / len(h)
            var = sum((v - mu) ** 2 for v in h) / len(h)
            sd = math.sqrt(var + 1e-5)
            g, sh = params[f"g{k}"], params[f"s{k}"]
            h = [float(g[i]) * (h[i] - mu) / sd + float(sh[i]) for i in range(len(h))]
        a = h
    L = len(hidden)
    W, b = params[f"W{L}"], params[f"b{L}"]
    return np.array([
        float(b[i]) + sum(float(W[i, j]) * a[j] for j in range(W.shape[1]))
        for i in range(W.shape[0])
    ])


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (copied)."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


# ---------------------------------------------------------------- dominance

def dominates(a, b):
    better = False
    for u, v in zip(a, b):
        if u > v:
            return False
        if u < v:
            better = True
    return better


def brute_force_fronts(Y):
    """Iterated removal of the non-dominated set, O(n^2) per front."""
    n = len(Y)
    remaining = list(range(n))
    ranks = [-1] * n
    k = 0
    while remaining:
        layer = [i for i in remaining if not any(dominates(Y[j], Y[i]) for j in remaining if j != i)]
        for i in layer:
            ranks[i] = k
        remaining = [i for i in remaining if ranks[i] < 0]
        k += 1
    return np.array(ranks)


# -------------------------------------------------------------- hypervolume

def mc_hypervolume(S, ref, n=1_000_000, seed=12345):
    """Plain Monte Carlo in the [min(S), ref] box; returns (estimate, stderr)."""
    S = np.asarray(S, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    lo = S.min(axis=0)
    rng = np.random.default_rng(seed)
    box = float(np.prod(ref - lo))
    hits = 0
    for s in range(0, n, 50_000):
        k = min(50_000, n - s)
        U = lo + rng.random((k, S.shape[1])) * (ref - lo)
        dom = np.zeros(k, dtype=bool)
        for p in S:
            dom |= np.all(p <= U, axis=1)
        hits += int(dom.sum())
    p = hits / n
    return box * p, box * math.sqrt(p * (1 - p) / n)


def inclusion_exclusion_hv(S, ref):
    """Exact union volume by inclusion-exclusion; only for tiny sets."""
    from itertools import combinations

    S = [np.asarray(p, dtype=np.float64) for p in S]
    ref = np.asarray(ref, dtype=np.float64)
    total = 0.0
    for r in range(1, len(S) + 1):
        for combo in combinations(S, r):
            corner = np.max(combo, axis=0)
            vol = float(np.prod(np.clip(ref - corner, 0.0, None)))
            total += (-1) ** (r + 1) * vol
    return total


# ------------------------------------------------------ benchmark functions
# Straight from the literature definitions, one design at a time.

def zdt1(x):
    n = len(x)
    f1 = x[0]
    g = 1 + 9 * sum(x[1:]) / (n - 1)
    return [f1, g * (1 - math.sqrt(f1 / g))]


def zdt2(x):
    n = len(x)
    f1 = x[0]
    g = 1 + 9 * sum(x[1:]) / (n - 1)
    return [f1, g * (1 - (f1 / g) ** 2)]


def zdt3(x):
    n = len(x)
    f1 = x[0]
    g = 1 + 9 * sum(x[1:]) / (n - 1)
    return [f1, g * (1 - math.sqrt(f1 / g) - f1 / g * math.sin(10 * math.pi * f1))]


def zdt4(x):
    n = len(x)
    f1 = x[0]
    g = 1 + 10 * (n - 1) + sum(v * v - 10 * math.cos(4 * math.pi * v) for v in x[1:])
    return [f1, g * (1 - math.sqrt(f1 / g))]


def zdt6(x):
    n = len(x)
    f1 = 1 - math.exp(-4 * x[0]) * math.sin(6 * math.pi * x[0]) ** 6
    g = 1 + 9 * (sum(x[1:]) / (n - 1)) ** 0.25
    return [f1, g * (1 - (f1 / g) ** 2)]


def _g1(xm):
    return 100 * (len(xm) + sum((v - 0.5) ** 2 - math.cos(20 * math.pi * (v - 0.5)) for v in xm))


def _g2(xm):
    return sum((v - 0.5) ** 2 for v in xm)


def dtlz1(x, m=3):
    g = _g1(x[m - 1:])
    f = []
    for i in range(m):
        v = 0.5 * (1 + g)
        for j in range(m - 1 - i):
            v *= x[j]
        if i > 0:
            v *= 1 - x[m - 1 - i]
        f.append(v)
    return f


def _sphere(theta, g, m):
    f = []
    for i in range(m):
        v = 1 + g
        for j in range(m - 1 - i):
            v *= math.cos(theta[j])
        if i > 0:
            v *= math.sin(theta[m - 1 - i])
        f.append(v)
    return f


def dtlz2(x, m=3):
    return _sphere([v * math.pi / 2 for v in x[:m - 1]], _g2(x[m - 1:]), m)


def dtlz3(x, m=3):
    return _sphere([v * math.pi / 2 for v in x[:m - 1]], _g1(x[m - 1:]), m)


def dtlz4(x, m=3):
    return _sphere([v ** 100 * math.pi / 2 for v in x[:m - 1]], _g2(x[m - 1:]), m)


def dtlz5(x, m=3):
    g = _g2(x[m - 1:])
    th = [x[0] * math.pi / 2] + [math.pi / (4 * (1 + g)) * (1 + 2 * g * v) for v in x[1:m - 1]]
    return _sphere(th, g, m)


def dtlz6(x, m=3):
    g = sum(v ** 0.1 for v in x[m - 1:])
    th = [x[0] * math.pi / 2] + [math.pi / (4 * (1 + g)) * (1 + 2 * g * v) for v in x[1:m - 1]]
    return _sphere(th, g, m)


def dtlz7(x, m=3):
    k = len(x) - m + 1
    g = 1 + 9 / k * sum(x[m - 1:])
    f = list(x[:m - 1])
    h = m - sum(fi / (1 + g) * (1 + math.sin(3 * math.pi * fi)) for fi in f)
    return f + [(1 + g) * h]


LITERATURE = {
    "zdt1": zdt1, "zdt2": zdt2, "zdt3": zdt3, "zdt4": zdt4, "zdt6": zdt6,
    "dtlz1": dtlz1, "dtlz2": dtlz2, "dtlz3": dtlz3, "dtlz4": dtlz4,
    "dtlz5": dtlz5, "dtlz6": dtlz6, "dtlz7": dtlz7,
}
