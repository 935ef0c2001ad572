"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--paths N] [--points N] [--repeat N]

Each kernel runs once untimed (JIT compilation), then ``--repeat`` times; the
best time is reported together with the max difference between the two results.
"""

import argparse
import time

import numpy as np

from mixpersist import _accel
from mixpersist.quadrature import tanh_sinh_rule


def best_of(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n_paths, n_points, rng):
    times = np.geomspace(1e-3, 1e3, n_points)
    paths = np.cumsum(rng.standard_normal((n_paths, n_points)) * np.sqrt(np.diff(times, prepend=0.0)), axis=1)
    thr = np.full(n_points, 1.0)
    cuts = np.linspace(n_points // 8, n_points, 8).astype(np.int64)
    y, _, w = tanh_sinh_rule()
    ratio = rng.uniform(0.0, 1.0, 20_000)
    return {
        "first_exceedance": (paths, thr),
        "bridge_log_survival": (paths, times, 1.0, cuts),
        "cumulative_trapezoid": (paths, times),
        "mg_sum_upper": (0.2, -0.8, ratio, y, w),
        "mg_sum_lower": (-0.2, ratio, y, w),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--points", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    np_k, nb_k = _accel.kernels("numpy"), _accel.kernels("numba")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, call in cases(args.paths, args.points, np.random.default_rng(0)).items():
        a, b = np_k[name](*call), nb_k[name](*call)
        finite = np.isfinite(a)
        assert np.array_equal(finite, np.isfinite(b)), name
        diff = float(np.max(np.abs(a[finite] - b[finite]), initial=0.0))
        t_np = best_of(np_k[name], call, args.repeat)
        t_nb = best_of(nb_k[name], call, args.repeat)
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
