"""
Cocycle Lab - Reduction Module
Deterministic reductions and ordered parallel maps.

Work is split into chunks whose boundaries depend only on the chunk size,
never on the worker count, and results are always reduced over the full
concatenated array with a fixed pairwise tree. Changing ``workers`` therefore
changes wall time and nothing else.
"""

import logging
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np
from joblib import Parallel, delayed

from .config import get_config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def pairwise_sum(values) -> float:
    """Sum with a fixed binary tree (a[0]+a[1], a[2]+a[3], ... repeated)."""
    a = np.asarray(values, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])


def pairwise_mean(values) -> float:
    a = np.asarray(values, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError("mean of an empty array")
    return pairwise_sum(a) / a.size


def ordered_map(
    func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None
) -> List[R]:
    """Map ``func`` over ``items`` preserving order, optionally with joblib."""
    workers = get_config().workers if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=workers)(delayed(func)(item) for item in items)


def chunk_array(xs: np.ndarray, chunk_size: Optional[int] = None) -> List[np.ndarray]:
    """Split into contiguous chunks of a fixed size (last one may be shorter)."""
    chunk_size = chunk_size or get_config().chunk_size
    return [xs[i : i + chunk_size] for i in range(0, len(xs), chunk_size)]


def grid_map(
    func: Callable[[np.ndarray], np.ndarray],
    xs: np.ndarray,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> np.ndarray:
    """
    Apply a vectorised per-point kernel over a grid in parallel chunks.

    ``func`` must treat points independently; its outputs (first axis aligned
    with the chunk) are concatenated in grid order.
    """
    chunks = chunk_array(np.asarray(xs), chunk_size)
    parts = ordered_map(func, chunks, workers)
    logger.debug(f"grid_map: {len(xs)} points in {len(chunks)} chunks")
    return np.concatenate(parts, axis=0)
