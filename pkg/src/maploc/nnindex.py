"""Exact nearest-neighbor index over 3D point sets.

Queries are bit-identical to a brute-force scan: distances are recomputed as
sqrt(sum of squared f64 differences) and exact distance ties resolve to the
smallest payload index. The spatial tree only accelerates candidate lookup.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, NonFiniteCoordinate


class PointIndex:
    """Immutable exact nearest-neighbor index over an N x 3 point list."""

    def __init__(self, points):
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        if len(pts) == 0:
            raise EmptyInput("cannot index zero points")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteCoordinate("indexed points contain NaN or infinity")
        self.points = pts
        self._tree = cKDTree(pts, balanced_tree=True, compact_nodes=True)

    def __len__(self) -> int:
        return len(self.points)

    def _resolve_ties(self, query: np.ndarray, dist: float) -> tuple[int, float]:
        # The ball radius is inflated so sqrt-then-square rounding can never
        # exclude an exact tie; exact squared-distance equality filters the
        # candidates back down to the true tie set.
        radius = dist * (1.0 + 1e-9) + 1e-300
        candidates = self._tree.query_ball_point(query, r=radius)
        cand = np.asarray(candidates, dtype=np.int64)
        d2 = np.sum((self.points[cand] - query) ** 2, axis=1)
        best = d2.min()
        return int(cand[d2 == best].min()), float(np.sqrt(best))

    def nearest(self, query) -> tuple[int, float]:
        """Return (payload index, distance) of the globally nearest point,
        ties broken by smallest index."""
        q = np.asarray(query, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(q)):
            raise NonFiniteCoordinate("query contains NaN or infinity")
        dist, _ = self._tree.query(q, k=1)
        return self._resolve_ties(q, float(dist))

    def nearest_batch(self, queries, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest over an N x 3 query array.

        Element-wise identical to mapping nearest(); `workers` only
        parallelizes the tree walk and cannot change results.
        """
        qs = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if len(qs) == 0:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
        if not np.all(np.isfinite(qs)):
            raise NonFiniteCoordinate("queries contain NaN or infinity")
        k = min(2, len(self.points))
        dist, idx = self._tree.query(qs, k=k, workers=workers)
        if k == 1:
            indices = np.asarray(idx, dtype=np.int64).reshape(-1)
        else:
            indices = np.asarray(idx[:, 0], dtype=np.int64)
            # A tie can only change the answer when the two nearest distances
            # are exactly equal; resolve just those queries.
            tied = np.flatnonzero(dist[:, 0] == dist[:, 1])
            for row in tied:
                indices[row], _ = self._resolve_ties(qs[row], float(dist[row, 0]))
        diffs = self.points[indices] - qs
        distances = np.sqrt(np.sum(diffs * diffs, axis=1))
        return indices, distances


def build(points) -> PointIndex:
    """Construct a PointIndex (functional spelling of the constructor)."""
    return PointIndex(points)
