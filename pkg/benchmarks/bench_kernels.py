"""Time the numba and numpy backends of the per-point kernels.

Usage: python3 benchmarks/bench_kernels.py [--points M] [--repeat R]

Each kernel is called once per backend before timing so that numba
compilation is excluded.  Results agree to rounding and the table reports
the best of R runs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rigidity import _kernels
from rigidity.grids import random_sphere_points
from rigidity.lawson_osserman import LO_MAP
from rigidity.profiles import homogeneous


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def rel_diff(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    both = np.isfinite(a) & np.isfinite(b)
    if not both.any():
        return 0.0
    return float(np.max(np.abs(a[both] - b[both]) / (1.0 + np.abs(a[both]))))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return 0

    X4 = random_sphere_points(args.points, 4, seed=0)
    H4 = homogeneous("lo-scalar").hessian(X4)
    X3 = random_sphere_points(args.points, 3, seed=1)
    H3 = homogeneous("q2-over-r").hessian(X3)
    cases = {
        "synthesize n=4": lambda b: _kernels.synthesize_batch(H4, X4, 1e-8, 1e6, backend=b),
        "synthesize n=3": lambda b: _kernels.synthesize_batch(H3, X3, 1e-8, 1e6, backend=b),
        "cone residual": lambda b: _kernels.quadratic_cone_residual(X4, LO_MAP.Q, backend=b),
    }
    print(f"{'kernel':<16} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'rel diff':>10}")
    for name, fn in cases.items():
        fn("numba")  # compile
        tn, out_np = best_of(lambda: fn("numpy"), args.repeat)
        tb, out_nb = best_of(lambda: fn("numba"), args.repeat)
        diff = max(rel_diff(a, b) for a, b in zip(out_np, out_nb))
        print(f"{name:<16} {tn:>10.3f} {tb:>10.3f} {tn / tb:>8.1f} {diff:>10.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
