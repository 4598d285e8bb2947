"""Order-preserving map with a thread cap from EXTREMAL_LOCUS_THREADS."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "EXTREMAL_LOCUS_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_VAR, "1")
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return count


def parallel_map(fn, items):
    """``[fn(x) for x in items]``, run on up to ``thread_count()`` threads."""
    items = list(items)
    workers = min(thread_count(), max(len(items), 1))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
