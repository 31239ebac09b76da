"""Worker-count control for pixel-parallel kernels.

The environment variable ``BEAMFORGE_THREADS`` caps the number of worker
threads (0 or unset = auto). Work items are split into contiguous chunks and
each chunk writes to a disjoint output region, so execution order never
affects results.
"""

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "parallel_chunks"]


def worker_count():
    raw = os.environ.get("BEAMFORGE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"BEAMFORGE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValueError("BEAMFORGE_THREADS must be >= 0")
    if n == 0:
        return os.cpu_count() or 1
    return n


def parallel_chunks(work, items, min_chunk=16):
    """Run ``work(chunk)`` over contiguous slices of ``items``.

    ``work`` must only write to output regions addressed by its own chunk.
    """
    n = len(items)
    if n == 0:
        return
    workers = min(worker_count(), max(1, n // min_chunk))
    if workers <= 1:
        work(items)
        return
    step = (n + workers - 1) // workers
    chunks = [items[i : i + step] for i in range(0, n, step)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(work, ch) for ch in chunks]:
            fut.result()
