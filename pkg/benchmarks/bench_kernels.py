"""Compiled kernels against the NumPy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time of each kernel for both backends and the speedup.
"""

import argparse
import timeit

import numpy as np

from kwc import _pykernels

try:
    from kwc import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    a, b = rng.normal(size=(2000, 2)), rng.normal(size=(2000, 2))
    y = np.cumsum(rng.normal(size=100_000))
    w = rng.uniform(0.1, 2.0, size=y.size - 1)
    node = rng.uniform(size=(500, 64))
    lv = np.linspace(0, 1, 64)
    jump = np.abs(lv[:, None] - lv[None, :]) ** 0.5
    return [
        ("directed_hausdorff 2000x2000", "directed_hausdorff", (a, b)),
        ("tv_prox_1d n=1e5", "tv_prox_1d", (y, 2.0)),
        ("tv_prox_1d_weighted n=1e5", "tv_prox_1d_weighted", (y, w)),
        ("chain_dp 500 nodes x 64 levels", "chain_dp", (node, jump)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for label, name, call_args in cases(rng):
        py = min(timeit.repeat(lambda: getattr(_pykernels, name)(*call_args), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{label:34s} {py:11.4f} {'n/a':>11s} {'n/a':>8s}")
            continue
        cy = min(timeit.repeat(lambda: getattr(_ckernels, name)(*call_args), number=1, repeat=args.repeat))
        print(f"{label:34s} {py:11.4f} {cy:11.4f} {py / cy:8.1f}")


if __name__ == "__main__":
    main()
