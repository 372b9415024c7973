"""Max-norm nearest-neighbour queries.

Two exact query paths share one contract (self excluded, counts use a strict
``<``):

* :class:`SpatialIndex`, a balanced kd-tree for point-by-point queries.
* :func:`knn_radii` / :func:`strict_counts`, batch queries over all points
  that sweep a sorted projection. These are what the estimators call.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from . import _sweep


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError(f"need a non-empty m x d point matrix, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


class SpatialIndex:
    """Balanced kd-tree over a fixed point set, queried under the max norm."""

    def __init__(self, points):
        pts = _as_points(points)
        self._points = np.array(pts, copy=True)
        self._points.flags.writeable = False
        self._tree = cKDTree(self._points, leafsize=16, balanced_tree=True, copy_data=False)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return self._points.shape[0]

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= len(self) - 1:
            raise ValueError(f"k must be in [1, {len(self) - 1}], got {k}")

    def kth_neighbor_distance(self, i: int, k: int) -> float:
        """Max-norm distance from point ``i`` to its k-th nearest other point."""
        self._check_k(k)
        # self sits at distance 0, so the (k+1)-th smallest value is the answer
        # even when exact duplicates of point i exist
        d, _ = self._tree.query(self._points[i], k=[k + 1], p=np.inf)
        return float(d[0])

    def kth_neighbor_distances(self, k: int) -> np.ndarray:
        self._check_k(k)
        d, _ = self._tree.query(self._points, k=[k + 1], p=np.inf)
        return d[:, 0]

    def count_within(self, i: int, radius: float) -> int:
        """Number of other points at max-norm distance strictly below ``radius``."""
        if radius < 0:
            raise ValueError("radius must be non-negative")
        if radius == 0:
            return 0
        r = np.nextafter(radius, 0.0)
        return int(self._tree.query_ball_point(self._points[i], r, p=np.inf, return_length=True)) - 1

    def count_within_all(self, radii) -> np.ndarray:
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), (len(self),))
        if np.any(radii < 0):
            raise ValueError("radii must be non-negative")
        r = np.nextafter(radii, 0.0)
        pos = radii > 0
        out = np.zeros(len(self), dtype=np.int64)
        if pos.any():
            out[pos] = self._tree.query_ball_point(
                self._points[pos], r[pos], p=np.inf, return_length=True) - 1
        return out


def build_index(points) -> SpatialIndex:
    return SpatialIndex(points)


def kth_neighbor_distance(index: SpatialIndex, query_point_id: int, k: int) -> float:
    return index.kth_neighbor_distance(query_point_id, k)


def count_within(index: SpatialIndex, query_point_id: int, radius: float) -> int:
    return index.count_within(query_point_id, radius)


# ------------------------------------------------------------ batch sweeps


def _sorted_by_first(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(points[:, 0], kind="stable")
    return order, np.ascontiguousarray(points[order])


def knn_radii(points, k: int) -> np.ndarray:
    """k-th nearest-neighbour max-norm distance of every point, in input order."""
    pts = _as_points(points)
    if not 1 <= k <= pts.shape[0] - 1:
        raise ValueError(f"k must be in [1, {pts.shape[0] - 1}], got {k}")
    order, sp = _sorted_by_first(pts)
    out = np.empty(pts.shape[0])
    out[order] = _sweep.kth_distance_sorted(sp, k)
    return out


def strict_counts(points, radii) -> np.ndarray:
    """Per-point count of other points strictly within its own radius."""
    pts = _as_points(points)
    radii = np.asarray(radii, dtype=np.float64)
    order, sp = _sorted_by_first(pts)
    out = np.empty(pts.shape[0], dtype=np.int64)
    out[order] = _sweep.count_strict_sorted(sp, np.ascontiguousarray(radii[order]))
    return out
