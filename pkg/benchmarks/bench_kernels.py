#!/usr/bin/env python3
"""Benchmark of the compiled chain kernels against the pure-numpy fallback.

Times forward_logz, forward_backward and viterbi_path per backend on random
lattices of a few representative sizes and prints a comparison table.

Usage: python benchmarks/bench_kernels.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from elcrf.kernels import backends

SIZES = [
    (20, 16),  # synthetic-task training shape
    (30, 64),
    (40, 128),
    (40, 512),  # the largest state space of the NER experiments
]


def bench(fn, args, repeats):
    fn(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    opts = parser.parse_args()

    impls = backends()
    rng = np.random.default_rng(opts.seed)
    header = f"{'kernel':<18}{'T x M':<12}" + "".join(
        f"{name:>14}" for name in impls
    )
    if len(impls) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for T, M in SIZES:
        emit = np.ascontiguousarray(rng.uniform(-3, 3, (T, M)))
        trans = np.ascontiguousarray(rng.uniform(-3, 3, (M, M)))
        for kernel in ("forward_logz", "forward_backward", "viterbi_path"):
            times = {
                name: bench(getattr(impl, kernel), (emit, trans), opts.repeats)
                for name, impl in impls.items()
            }
            row = f"{kernel:<18}{f'{T} x {M}':<12}" + "".join(
                f"{t * 1e3:>12.3f}ms" for t in times.values()
            )
            if "compiled" in times and "python" in times:
                row += f"{times['python'] / times['compiled']:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
