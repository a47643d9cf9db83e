"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from qapricing import _fallback
from qapricing._backend import BACKENDS
from qapricing.estimation import simulate_series
from qapricing.markov import TABLE_AR1


def cases():
    y, _ = simulate_series(TABLE_AR1, 5000, seed=1)
    a, b, c, rho = TABLE_AR1.as_vector()
    p0 = c * c / (1 - rho * rho)
    rng = np.random.Generator(np.random.Philox(3))
    mat = rng.uniform(0.0, 1.0, (64, 64))
    mat /= mat.sum(axis=1, keepdims=True)
    # slow mixing chain so power iteration runs many steps
    lazy = 0.999 * np.eye(64) + 0.001 * mat
    v0 = np.arange(1.0, 65.0)
    return {
        "kalman_loglik T=5000": lambda k: k.kalman_loglik(y, a, b, c, rho, p0),
        "kalman_filter T=5000": lambda k: k.kalman_filter(y, a, b, c, rho, p0, np.empty(y.size)),
        "power_iterate 64x64": lambda k: k.power_iterate(lazy.T, v0, 1e-13, 10**6, 1),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    impls = {"python": _fallback, **({"cython": BACKENDS["cython"]} if "cython" in BACKENDS else {})}
    if len(impls) == 1:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<24}" + "".join(f"{name:>14}" for name in impls) + f"{'speed-up':>12}")
    for label, fn in cases().items():
        times = {}
        for name, impl in impls.items():
            number = 1 if name == "python" else 10
            best = min(timeit.repeat(lambda: fn(impl), number=number, repeat=args.repeat))
            times[name] = best / number
        row = f"{label:<24}" + "".join(f"{times[n] * 1e3:>12.3f}ms" for n in impls)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
