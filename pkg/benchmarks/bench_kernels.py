"""Compare the numba and numpy kernel paths.

Run with ``python3 benchmarks/bench_kernels.py [--rounds N] [--repeat R]``.
Each kernel is timed on both paths (after one warm-up call so numba's
compile time is excluded) and the outputs are checked to be identical.
"""

import argparse
import time

import numpy as np

from icokd import _kernels as K
from icokd.attacks import AttackParams
from icokd.protocol import run_session


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    n = args.rounds

    cdf = np.cumsum(np.full(32, 1 / 32))
    cdf[-1] = 1.0
    u = K.counter_uniforms_np(1, 0, n)
    coeffs = np.array([0.3, -0.1, 0.2, -0.25])
    cases = {
        f"counter_uniforms n={n}": (lambda: K.counter_uniforms_np(1, 0, n), lambda: K.counter_uniforms_nb(1, 0, n)),
        f"sample_categorical n={n}": (lambda: K.sample_categorical_np(cdf, u), lambda: K.sample_categorical_nb(cdf, u)),
        "bilinear_grid_min n=401": (lambda: K.bilinear_grid_min_np(coeffs, 401), lambda: K.bilinear_grid_min_nb(coeffs, 401)),
    }
    print(f"backend selected at import: {K.BACKEND}")
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speed-up':>9s}")
    for name, (f_np, f_nb) in cases.items():
        t_np = best_of(f_np, args.repeat)
        if not K.HAVE_NUMBA:
            print(f"{name:32s} {1e3 * t_np:12.2f} {'n/a':>12s}")
            continue
        a, b = f_np(), f_nb()
        same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
        assert same, f"{name}: paths disagree"
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:32s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.1f}x")

    t0 = time.perf_counter()
    run_session(n, AttackParams.intercept_z(), seed=1)
    print(f"run_session {n} rounds ({K.BACKEND}): {time.perf_counter() - t0:.3f} s")


if __name__ == "__main__":
    main()
