"""Deterministic row-parallel execution.

Work is always split into the same per-row units no matter how many
workers run them, and reductions always combine the per-row partials in
the same pairwise-tree order, so every result is bit-identical across
thread counts.
"""

from concurrent.futures import ThreadPoolExecutor


def map_rows(fn, n_rows: int, threads: int = 1) -> list:
    """Apply fn(row_index) for every row, in row order."""
    if threads is None or threads <= 1 or n_rows <= 1:
        return [fn(r) for r in range(n_rows)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_rows)))


def tree_sum(parts: list):
    """Sum a list by pairwise combination; order fixed by list position."""
    if not parts:
        raise ValueError("tree_sum needs at least one partial")
    while len(parts) > 1:
        nxt = []
        for i in range(0, len(parts) - 1, 2):
            nxt.append(parts[i] + parts[i + 1])
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]
