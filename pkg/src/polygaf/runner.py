"""Chunked trial execution whose output does not depend on the worker count.

Trials are split into fixed-size chunks of consecutive indices.  Each chunk is
a pure function of (config, seed, index range) because coefficients come from
a counter-based generator, so chunks may run in any process in any order;
results are returned in chunk order.
"""

from __future__ import annotations

import multiprocessing as mp
import os

DEFAULT_CHUNK = 2000


def default_workers() -> int:
    env = os.environ.get("POLYGAF_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_ranges(trials: int, chunk: int = DEFAULT_CHUNK, start: int = 0):
    return [(i, min(i + chunk, start + trials)) for i in range(start, start + trials, chunk)]


def _call(args):
    fn, lo, hi = args
    return fn(lo, hi)


def run_chunks(fn, trials: int, chunk: int = DEFAULT_CHUNK, workers: int | None = None, start: int = 0) -> list:
    """[fn(lo, hi) for each chunk], computed with ``workers`` processes.

    ``fn`` must be picklable (a module-level function or functools.partial).
    """
    ranges = chunk_ranges(trials, chunk, start)
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, len(ranges))
    if workers <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    ctx = mp.get_context("fork")
    with ctx.Pool(workers) as pool:
        return pool.map(_call, [(fn, lo, hi) for lo, hi in ranges], chunksize=1)
