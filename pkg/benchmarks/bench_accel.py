"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_accel.py [--sizes 500 1000 2000] [--repeat 3] [--threads 1]

Both paths are called directly, so the GAIT_DISABLE_NUMBA flag does not
matter here. Every timing row also reports the max abs difference between
the two outputs.
"""

import argparse
import time

import numpy as np

from gait import _accel


def best_of(fn, repeat):
    out = fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, rng):
    x = rng.normal(size=(n, 2))
    y = rng.normal(size=(n // 2, 2))
    w = rng.random((n, n // 2))
    p = np.full(n, 1.0 / n)
    sig = np.linspace(0.05, 3.0, 100)
    eps = np.linspace(0.01, 2.0, 100)
    yield "pairwise rbf_sq", lambda f: f(x, y, _accel.RBF_SQ, 0.5, 2.0, 1.5), "pairwise_kernel"
    yield "pairwise exp_metric p=3", lambda f: f(x, y, _accel.EXP_METRIC, 0.5, 3.0, 1.5), "pairwise_kernel"
    yield "grad polynomial", lambda f: f(x, y, w, _accel.POLYNOMIAL, 0.5, 2.0, 1.5, False)[0], "grad_contract"
    yield "collisions", lambda f: f(x, eps, 2.0), "collision_counts"
    yield "profile sweep x100", lambda f: f(x, p, sig), "rbf_profile_sweep"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    _accel.set_threads(args.threads)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'n':>6}{'numpy s':>11}{'numba s':>11}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        for name, call, fn in cases(n, rng):
            t_np, a = best_of(lambda: call(getattr(_accel, fn + "_np")), args.repeat)
            t_nb, b = best_of(lambda: call(getattr(_accel, fn + "_nb")), args.repeat)
            diff = float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))
            print(f"{name:<26}{n:>6}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
