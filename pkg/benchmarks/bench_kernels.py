"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are called directly, so the env flag does not matter here; the
first numba call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from pmline import kernels
from pmline._jit import USE_NUMBA


def _best(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    x = rng.lognormal(1.0, 0.5, 5000)
    a = rng.integers(0, 40, 120).astype(np.int64)
    b = rng.integers(0, 40, 130).astype(np.int64)
    u = rng.normal(0, 1, 20000)
    v = rng.normal(0.3, 1.2, 15000)
    return [
        ("rank_sum_scan n=5000 w=50", kernels._rank_sum_scan_loop,
         kernels._rank_sum_scan_numpy, (x, 50)),
        ("rolling_mean n=5000 w=10", kernels._rolling_mean_loop,
         kernels._rolling_mean_numpy, (x, 10)),
        ("levenshtein 120x130", kernels._levenshtein_loop,
         kernels._levenshtein_numpy, (a, b)),
        ("wasserstein_1d 20k/15k", kernels._wasserstein_loop,
         kernels._wasserstein_numpy, (u, v)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"numba enabled: {USE_NUMBA}")
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, jit_fn, np_fn, fargs in cases(rng):
        t_np = _best(np_fn, fargs, args.repeat)
        if USE_NUMBA:
            t_jit = _best(jit_fn, fargs, args.repeat)
            print(f"{name:32s} {t_jit * 1e3:10.3f} {t_np * 1e3:10.3f} {t_np / t_jit:8.1f}")
        else:
            print(f"{name:32s} {'n/a':>10s} {t_np * 1e3:10.3f} {'':>8s}")


if __name__ == "__main__":
    main()
