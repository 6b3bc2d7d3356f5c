"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from pgdmoo import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    Y2 = rng.random((5000, 2))
    Y3 = rng.random((2000, 3))
    front2 = np.column_stack([np.linspace(0, 1, 2000), 1 - np.linspace(0, 1, 2000) ** 0.5])
    u = rng.random((800, 2))
    front3 = np.column_stack([u, 1.5 - u.sum(axis=1)])  # mutually non-dominated plane
    S = rng.random((200_000, 3)) * 1.1
    return [
        ("front_ranks n=5000 m=2", lambda k: k.front_ranks(Y2)),
        ("front_ranks n=2000 m=3", lambda k: k.front_ranks(Y3)),
        ("hv2d n=2000", lambda k: k.hv2d(front2, np.array([1.1, 1.1]))),
        ("hv3d n=800", lambda k: k.hv3d(front3, np.array([1.1, 1.1, 1.6]))),
        ("count_dominated 2e5 x 800", lambda k: k.count_dominated(S, front3)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for name, fn in cases(rng):
        tp = best_of(lambda: fn(kernels.python_backend), args.repeat)
        if kernels.compiled_backend is None:
            print(f"{name:<28}{tp:>12.4f}{'-':>14}{'-':>10}")
            continue
        a = fn(kernels.python_backend)
        b = fn(kernels.compiled_backend)
        assert np.allclose(a, b, rtol=1e-12), name
        tc = best_of(lambda: fn(kernels.compiled_backend), args.repeat)
        print(f"{name:<28}{tp:>12.4f}{tc:>14.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
