"""Ordered thread-pool map; results never depend on the worker count."""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, n_jobs=1):
    items = list(items)
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))
