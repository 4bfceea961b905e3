"""Compare the numba and numpy kernel backends.

The backend is read from MPM_KERNELS on every call, so both run in one process.
Results are checked for equality before timings are reported.

    python benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import os
import time

import numpy as np

from mpm.dynamics import DoubleIntegrator
from mpm.geometry import BoxUnion
from mpm.reach import one_step_feasible


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_cover_query(repeat, rng):
    # integer corners keep the index grid small
    lo = rng.integers(0, 16, (400, 4)).astype(float)
    u = BoxUnion(lo, lo + rng.integers(1, 4, (400, 4))).canonical()
    idx = u.cover_index()
    qlo = rng.uniform(0, 19, (200_000, 4))
    qhi = qlo + rng.uniform(0, 0.5, (200_000, 4))
    return lambda: idx.query(qlo, qhi)


def bench_contains_point(repeat, rng):
    lo = rng.uniform(0, 10, (2000, 4))
    u = BoxUnion(lo, lo + 0.3)
    xs = rng.uniform(0, 10, (2000, 4))
    return lambda: np.array([u.contains_point(x) for x in xs])


def bench_one_step(repeat, rng):
    m = DoubleIntegrator()
    tgt = BoxUnion([[2, -1, 2, -1], [6, 0, 6, 0]], [[7, 1, 7, 1], [9, 1.5, 9, 1.5]])
    return lambda: one_step_feasible(m, tgt, 0, (0.5, 0.25, 0.5, 0.25))


def _same(a, b):
    if isinstance(a, BoxUnion):
        return np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    benches = {"cover_query": bench_cover_query, "contains_point": bench_contains_point,
               "one_step_feasible": bench_one_step}
    print(f"{'kernel':<20}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, make in benches.items():
        fn = make(args.repeat, np.random.default_rng(args.seed))
        res = {}
        for backend in ("numba", "numpy"):
            os.environ["MPM_KERNELS"] = backend
            fn()  # warm up (jit compile, caches)
            res[backend] = _time(fn, args.repeat)
        if not _same(res["numba"][1], res["numpy"][1]):
            raise SystemExit(f"{name}: backends disagree")
        tn, tp = res["numba"][0], res["numpy"][0]
        print(f"{name:<20}{tn:>10.4f}{tp:>10.4f}{tp / tn:>8.1f}x")
    os.environ.pop("MPM_KERNELS", None)


if __name__ == "__main__":
    main()
