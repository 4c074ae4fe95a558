"""Worker-count resolution and an order-preserving chunked map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "LIDARSWD_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """``None`` reads ``$LIDARSWD_THREADS`` (default 1); ``0`` means all cores."""
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    threads = int(threads)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, n))
    edges = [n * k // parts for k in range(parts + 1)]
    return [(edges[k], edges[k + 1]) for k in range(parts) if edges[k + 1] > edges[k]]


def map_chunks(fn, n: int, threads: int | None = None) -> list:
    """Call ``fn(lo, hi)`` over contiguous chunks of ``range(n)``; results in chunk order."""
    workers = resolve_threads(threads)
    bounds = chunk_bounds(n, workers)
    if workers == 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))
