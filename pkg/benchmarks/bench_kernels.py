"""Compare the compiled kernels with the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``. Prints one line
per kernel with the median time of each backend and the speed-up.
"""

from __future__ import annotations

import argparse
import statistics
import timeit

import numpy as np

from spectral_nie._kernels import _pykernels

try:
    from spectral_nie._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(rng: np.random.Generator):
    coeffs = rng.standard_normal((17, 2))
    x = rng.uniform(-1.0, 1.0, 100)
    theta = rng.uniform(0.0, np.pi, 2000)
    values = rng.standard_normal((2000, 2))

    n = 80
    weights = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.2) * 0.3
    lag = rng.uniform(0.0, 1.0, (n, n)) / 0.01
    lag_steps = np.floor(lag).astype(np.int64)
    lag_frac = lag - lag_steps
    stim = (rng.random(n) < 0.25).astype(np.float64)
    x0 = rng.uniform(-1.0, 1.0, n)

    return {
        "clenshaw (N=16, 100 pts, d=2)": lambda k: k.clenshaw(coeffs, x),
        "cos_moments (2000 samples, k<=16)": lambda k: k.cos_moments(theta, values, 16),
        "delay_euler (80 nodes, 400 steps)": lambda k: k.delay_euler(
            x0, weights, lag_steps, lag_frac, 1.0, stim, 100, 0.01, 400, 1e6),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled kernels not available; build with `pip install -e . --no-build-isolation`")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}{'python (ms)':>12}{'cython (ms)':>12}{'speed-up':>10}")
    for name, call in _cases(rng).items():
        times = {}
        for label, mod in (("python", _pykernels), ("cython", _ckernels)):
            timer = timeit.Timer(lambda mod=mod: call(mod))
            number, _ = timer.autorange()
            runs = timer.repeat(repeat=args.repeat, number=number)
            times[label] = statistics.median(runs) / number * 1e3
        print(f"{name:<38}{times['python']:>12.4f}{times['cython']:>12.4f}"
              f"{times['python'] / times['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
