"""Order-fixed parallel map over sample chunks."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..dynamics import PointSet

CHUNK = 2000  # fixed so results never depend on the worker count


def chunks(points: PointSet, size: int = CHUNK) -> list:
    return [PointSet(points.x[i:i + size], points.s[i:i + size]) for i in range(0, len(points), size)]


def pmap(fn, items, workers: int = 1) -> list:
    """``[fn(item) for item in items]``, optionally across processes, in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def tree_sum(values) -> float:
    """Pairwise sum in a fixed order."""
    v = [float(x) for x in values]
    if not v:
        return 0.0
    while len(v) > 1:
        v = [v[i] + v[i + 1] if i + 1 < len(v) else v[i] for i in range(0, len(v), 2)]
    return v[0]


def tree_mean(arr) -> float:
    arr = np.asarray(arr, dtype=float).ravel()
    return tree_sum(arr) / len(arr) if len(arr) else float("nan")
