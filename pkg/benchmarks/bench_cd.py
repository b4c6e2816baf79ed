#!/usr/bin/env python3
"""Benchmark the coordinate-descent backends (compiled vs pure Python).

Times full clamped inference (primal + dual sweeps) per architecture, at
two granularities: many single-pass calls (the stochastic driver's access
pattern, wrapper overhead included) and one multi-pass call (the doubling
refinement's pattern, kernel-bound).

Usage: python benchmarks/bench_cd.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from gapmm.chl import inference
from gapmm.chl.net import LayeredNet, ff_init, zero_dual

ARCHS = [
    (4, 3, 2),
    (8, 6, 6, 4),
    (32, 16, 16, 8),
    (64, 32, 32, 32, 10),
]


def time_single_pass(net, x, y, calls):
    primal = ff_init(net, x)
    dual = zero_dual(net, clamped=True)
    start = time.perf_counter()
    for _ in range(calls):
        primal = inference.cd_primal_pass(net, x, y, primal)
        dual = inference.cd_dual_pass(net, x, y, dual)
    return time.perf_counter() - start


def time_multi_pass(net, x, y, passes):
    start = time.perf_counter()
    inference.cd_primal_pass(net, x, y, ff_init(net, x), passes=passes)
    inference.cd_dual_pass(net, x, y, zero_dual(net, clamped=True), passes=passes)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--calls", type=int, default=300,
                        help="single-pass calls per measurement")
    parser.add_argument("--passes", type=int, default=300,
                        help="passes in the multi-pass measurement")
    args = parser.parse_args()

    backends = ["python"]
    try:
        from gapmm.chl import _cd_cy  # noqa: F401
        backends.append("compiled")
    except ImportError:
        print("compiled backend not built; timing the fallback only")

    rng = np.random.default_rng(0)
    header = (f"{'arch':>18} {'mode':>12} "
              + " ".join(f"{b:>12}" for b in backends)
              + ("     speedup" if len(backends) == 2 else ""))
    print(header)
    print("-" * len(header))
    for sizes in ARCHS:
        net = LayeredNet.random(sizes, seed=1, scale=0.7)
        x = rng.normal(size=sizes[0])
        y = rng.normal(size=sizes[-1])
        for mode, timer, unit_count in (
                ("single-pass", time_single_pass, args.calls),
                ("multi-pass", time_multi_pass, args.passes)):
            per_backend = {}
            for backend in backends:
                inference.set_backend(backend)
                best = min(timer(net, x, y, unit_count)
                           for _ in range(args.repeats))
                per_backend[backend] = best / unit_count
            row = (f"{'-'.join(map(str, sizes)):>18} {mode:>12} "
                   + " ".join(f"{per_backend[b] * 1e6:9.2f} us" for b in backends))
            if len(backends) == 2:
                row += f" {per_backend['python'] / per_backend['compiled']:10.2f}x"
            print(row)
    inference.set_backend("python")
    try:
        inference.set_backend("compiled")
    except Exception:
        pass


if __name__ == "__main__":
    main()
