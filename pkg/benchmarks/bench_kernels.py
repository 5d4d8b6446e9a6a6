"""Benchmark the compiled Coulomb pair kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 500] [--m 400] [--dim 3] [--reps 5]
"""

import argparse
import time

import numpy as np

from wsfn_lab import _kernels_numpy as np_impl

try:
    from wsfn_lab import _coulomb_core as ext_impl
except ImportError:
    ext_impl = None


def timeit(fn, args, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--m", type=int, default=400)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.n, args.dim))
    y = rng.standard_normal((args.m, args.dim))
    v = rng.standard_normal((args.n, args.dim))
    eps2 = 0.05**2

    cases = [
        ("energy_self", (x, eps2)),
        ("energy_cross", (x, y, eps2)),
        ("grad_self", (x, eps2)),
        ("grad_cross", (x, y, eps2)),
        ("wsum_self", (x, v, eps2)),
        ("wdiag_self", (x, eps2)),
        ("wdiag_cross", (x, y, eps2)),
    ]

    if ext_impl is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"N={args.n} M={args.m} d={args.dim}, best of {args.reps}")
    header = f"{'kernel':14s} {'numpy (ms)':>12s}"
    if ext_impl is not None:
        header += f" {'compiled (ms)':>14s} {'speedup':>9s}"
    print(header)
    for name, case_args in cases:
        t_np = timeit(getattr(np_impl, name), case_args, args.reps)
        line = f"{name:14s} {t_np * 1e3:12.3f}"
        if ext_impl is not None:
            t_ext = timeit(getattr(ext_impl, name), case_args, args.reps)
            line += f" {t_ext * 1e3:14.3f} {t_np / t_ext:9.2f}x"
            got = getattr(ext_impl, name)(*case_args)
            want = getattr(np_impl, name)(*case_args)
            if not np.allclose(got, want, rtol=1e-10, atol=1e-12):
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()
