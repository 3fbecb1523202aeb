"""Timing harness comparing the reference and summed-area-table statistics."""

from __future__ import annotations

import time

import numpy as np

from .imagecore import ImageF
from .transform import patch_stats, windowed_stats_fast


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def benchmark_stats(size: int = 1024, patch_size: int = 15, channels: int = 3,
                    repeats: int = 1, seed: int = 0) -> dict:
    """Best-of-``repeats`` wall time of both routes on one random image."""
    img = ImageF(np.random.default_rng(seed).random((size, size, channels)))
    naive = _best_time(lambda: patch_stats(img, patch_size), repeats)
    fast = _best_time(lambda: windowed_stats_fast(img, patch_size), repeats)
    diff = float(np.max(np.abs(patch_stats(img, patch_size).std.data
                               - windowed_stats_fast(img, patch_size).std.data)))
    return {
        "size": size,
        "patch_size": patch_size,
        "channels": channels,
        "naive_s": naive,
        "fast_s": fast,
        "speedup": naive / fast,
        "max_abs_std_diff": diff,
    }
