"""Worker-pool helper honouring the SNRGE_THREADS environment variable.

Results are always assembled in input order, so any function mapped here
must be pure for the output to be independent of the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "SNRGE_THREADS"


def worker_count() -> int:
    """Number of workers to use; SNRGE_THREADS caps it, default = logical cores."""
    raw = os.environ.get(_ENV_VAR)
    if raw is not None:
        n = int(raw)
        if n < 1:
            raise ValueError(f"{_ENV_VAR} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn, items):
    """Map `fn` over `items`, preserving order. `fn` must be pure."""
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
