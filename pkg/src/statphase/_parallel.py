from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def num_threads() -> int:
    env = os.environ.get("TFSPA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError("TFSPA_THREADS must be an integer") from None
    return min(8, os.cpu_count() or 1)


def thread_map(fn, items):
    """Ordered map over ``items``, threaded up to ``TFSPA_THREADS`` workers."""
    items = list(items)
    n = num_threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
