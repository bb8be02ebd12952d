#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Sizes mirror the hot paths: DTW over a full padded window's cross-attention
matrix (1500 frames x decoded tokens) and word-level edit distance over
transcript-scale sequences.

Usage: python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from streamscribe.kernels import _pykernels

try:
    from streamscribe.kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_dtw(impl, frames, tokens, rng):
    cost = rng.random((frames, tokens))
    return timeit(impl.dtw_path, cost)


def bench_levenshtein(impl, length, rng):
    a = rng.integers(0, 500, size=length)
    b = rng.integers(0, 500, size=length)
    return timeit(impl.levenshtein, a.tolist(), b.tolist())


def main() -> None:
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("c", _ckernels))
    else:
        print("note: compiled kernels unavailable, benchmarking fallback only")

    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    cases = [
        ("dtw 200x50", lambda impl: bench_dtw(impl, 200, 50, rng)),
        ("dtw 750x150", lambda impl: bench_dtw(impl, 750, 150, rng)),
        ("dtw 1500x300", lambda impl: bench_dtw(impl, 1500, 300, rng)),
        ("levenshtein 500 words", lambda impl: bench_levenshtein(impl, 500, rng)),
        ("levenshtein 2000 words", lambda impl: bench_levenshtein(impl, 2000, rng)),
    ]
    for label, runner in cases:
        times = [runner(impl) for _, impl in backends]
        row = f"{label:<28}" + "".join(f"{t * 1000:>10.1f}ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
