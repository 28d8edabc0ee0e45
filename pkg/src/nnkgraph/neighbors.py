"""Exact brute-force K-nearest-neighbor search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import PointSet


class InvalidK(ValueError):
    pass


@dataclass(frozen=True)
class NeighborList:
    """Row ``i`` holds node i's K nearest other nodes, nearest first."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def __getitem__(self, i):
        return self.indices[i]


def knn_search(ps: PointSet, K: int, block: int = 512) -> NeighborList:
    """Nearest neighbors by Euclidean distance; ties go to the lower index."""
    n = ps.n
    if not (1 <= K < n):
        raise InvalidK(f"need 1 <= K < N, got K={K}, N={n}")
    X = ps.points
    idx = np.empty((n, K), dtype=np.int64)
    dist = np.empty((n, K))
    for start in range(0, n, block):
        stop = min(n, start + block)
        # direct differences, not the |a|^2 - 2ab + |b|^2 expansion: exact ties stay ties
        d2 = cdist(X[start:stop], X, "sqeuclidean")
        rows = np.arange(stop - start)
        d2[rows, rows + start] = np.inf
        kth = np.partition(d2, K - 1, axis=1)[:, K - 1]
        for r in rows:
            # everything up to the K-th distance, ties included, then order by (distance, index)
            cand = np.flatnonzero(d2[r] <= kth[r])
            order = cand[np.lexsort((cand, d2[r, cand]))][:K]
            idx[start + r] = order
            dist[start + r] = np.sqrt(d2[r, order])
    idx.setflags(write=False)
    dist.setflags(write=False)
    return NeighborList(idx, dist)
