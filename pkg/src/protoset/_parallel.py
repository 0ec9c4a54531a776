"""Chunked thread-pool map over pattern batches.

Workers only ever compute per-pattern results into disjoint slices; callers
do every reduction afterwards in index order, so the output does not depend
on the thread count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_VAR = "PROTOSET_THREADS"
# below this many patterns per worker the pool costs more than it saves
MIN_CHUNK = 64


def thread_count():
    raw = os.environ.get(ENV_VAR, "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        return os.cpu_count() or 1
    return value


def map_chunks(fn, n, *arrays):
    """Apply ``fn(*[a[lo:hi] for a in arrays])`` over contiguous chunks of ``n`` rows.

    ``fn`` returns a tuple of arrays whose first axis has length ``hi - lo``;
    the chunks are concatenated back in order.
    """
    workers = min(thread_count(), max(1, n // MIN_CHUNK))
    if workers <= 1:
        return fn(*arrays)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    pieces = [tuple(a[lo:hi] for a in arrays) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda args: fn(*args), pieces))
    return tuple(np.concatenate(parts) for parts in zip(*results))
