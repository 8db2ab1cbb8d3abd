"""Schedule-independent parallel maps over derived random streams.

Work item ``j`` always receives stream ``rng.child(j)`` and results are merged
by item id, so the output never depends on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .rng import RngStream

#: reserved child index for pilot/auxiliary draws that must not collide with
#: replicate or chunk streams
AUX_KEY = (1 << 64) - 1


def map_streams(fn, count: int, rng: RngStream, workers: int = 1):
    """``[fn(j, rng.child(j)) for j in range(count)]``, optionally on a thread pool."""
    if workers is None or workers <= 1 or count <= 1:
        return [fn(j, rng.child(j)) for j in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, j, rng.child(j)) for j in range(count)]
        return [fut.result() for fut in futures]


def chunk_sizes(total: int, chunk: int):
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
