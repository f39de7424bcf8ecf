#!/usr/bin/env python3
"""Benchmark the compiled Philox kernels against the NumPy fallback.

Times raw-word and uniform generation in both backends (the outputs are
bit-identical, so this is purely a throughput comparison), plus two
end-to-end consumers: normal variates through the shared Box-Muller path
and mock-pipeline watermark generation.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np


def _throughput(fn, units: int, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return units / best


def _bench_backend(module, n: int) -> dict:
    key0, key1 = 0x9E3779B97F4A7C15, 0xDEADBEEF

    def small_calls():
        for _ in range(20_000):
            module.philox_uniforms(key0, key1, 0, 96)

    return {
        "raw M u64/s": _throughput(lambda: module.philox_raw(key0, key1, 0, n), n) / 1e6,
        "uniform M f64/s": _throughput(lambda: module.philox_uniforms(key0, key1, 0, n), n) / 1e6,
        "96-elem call us": 1e6 / _throughput(small_calls, 20_000, repeats=3),
    }


def _bench_stream_normals(n: int) -> float:
    from pmark.rng import stream

    return _throughput(lambda: stream(1, 2, 3).normals(n), n) / 1e6


def _bench_mock_pipeline(trials: int) -> float:
    from pmark.endpoint import MockEndpoint
    from pmark.keys import MasterKey
    from pmark.pipeline import generate_watermarked
    from pmark.rng import stream

    key = MasterKey(seed=7, dim=64, channels=4)

    def run():
        for i in range(trials):
            generate_watermarked(
                "Benchmark prompt.", key, "online", 12, 64,
                MockEndpoint(seed=i, dim=64), stream(9, i),
            )

    return _throughput(run, trials, repeats=3)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller sizes")
    args = parser.parse_args()
    n = 2_000_000 if args.quick else 20_000_000
    trials = 3 if args.quick else 10

    from pmark import _philox_numpy
    from pmark import rng as pmark_rng

    backends = {"numpy": _philox_numpy}
    try:
        from pmark import _kernels

        backends["compiled"] = _kernels
    except ImportError:
        print("compiled kernels not built; benchmarking the fallback only")

    print(f"active backend for pmark.rng: {pmark_rng.BACKEND}\n")
    header = f"{'backend':>10} | {'raw M u64/s':>12} | {'uniform M f64/s':>16} | {'96-elem call us':>16}"
    print(header)
    print("-" * len(header))
    results = {}
    for name, module in backends.items():
        results[name] = _bench_backend(module, n)
        row = results[name]
        print(
            f"{name:>10} | {row['raw M u64/s']:>12.1f} | {row['uniform M f64/s']:>16.1f}"
            f" | {row['96-elem call us']:>16.2f}"
        )
    if len(results) == 2:
        speedup = results["compiled"]["raw M u64/s"] / results["numpy"]["raw M u64/s"]
        print(f"\ncompiled/numpy raw speedup: {speedup:.2f}x")

    print(f"\nshared Box-Muller over active backend: {_bench_stream_normals(n):.1f} M normals/s")
    docs_per_s = _bench_mock_pipeline(trials)
    print(f"mock online generation (T=12, N=64, dim=64): {docs_per_s:.2f} docs/s")

    # sanity: identical bits regardless of speed
    if len(backends) == 2:
        a = backends["numpy"].philox_raw(1, 2, 0, 4096)
        b = backends["compiled"].philox_raw(1, 2, 0, 4096)
        assert np.array_equal(a, b), "backends diverged!"
        print("bitstream check: backends identical")


if __name__ == "__main__":
    main()
