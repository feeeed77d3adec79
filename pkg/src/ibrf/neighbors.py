"""Exact Euclidean k-nearest-neighbour search by brute force.

Ties in distance go to the smaller reference index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True, eq=False)
class NeighborQuery:
    reference_points: np.ndarray
    k: int
    exclude_self: bool = False

    def __post_init__(self):
        ref = np.asarray(self.reference_points, dtype=np.float64)
        if ref.ndim != 2:
            raise ValueError("reference_points must be a 2-D array")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        eligible = ref.shape[0] - (1 if self.exclude_self else 0)
        if self.k > eligible:
            raise ValueError(
                f"k={self.k} exceeds the {eligible} eligible reference points"
            )
        object.__setattr__(self, "reference_points", ref)


def squared_distances(points: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(points), len(reference)).

    Each entry is a direct sum of squared coordinate differences (no
    dot-product expansion), so mirrored pairs get bit-identical distances.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    reference = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    return cdist(points, reference, "sqeuclidean")


def _rank(d2: np.ndarray, k: int) -> np.ndarray:
    """First ``k`` columns of each row ordered by (distance, index)."""
    n = d2.shape[-1]
    if k >= n or n <= 64:
        return np.argsort(d2, axis=-1, kind="stable")[..., :k]
    d2 = np.atleast_2d(d2)
    sel = np.argpartition(d2, k - 1, axis=1)[:, :k]
    sel_d = np.take_along_axis(d2, sel, axis=1)
    order = np.lexsort((sel, sel_d), axis=-1)
    sel = np.take_along_axis(sel, order, axis=1)
    # argpartition picks arbitrarily among distances tied with the k-th;
    # redo those rows with a full stable sort
    kth = np.take_along_axis(d2, sel[:, -1:], axis=1)
    tied = np.flatnonzero((d2 <= kth).sum(axis=1) > k)
    if tied.size:
        sel[tied] = np.argsort(d2[tied], axis=1, kind="stable")[:, :k]
    return sel


def knn(query_point, query: NeighborQuery, self_index: int | None = None) -> np.ndarray:
    """Indices of the ``k`` nearest reference points, nearest first.

    With ``query.exclude_self`` the caller passes ``self_index``, the position
    of the query among the reference points; that row is skipped when it
    coincides with the query.
    """
    x = np.asarray(query_point, dtype=np.float64).ravel()
    ref = query.reference_points
    if x.shape[0] != ref.shape[1]:
        raise ValueError(
            f"query has {x.shape[0]} dimensions, reference points have {ref.shape[1]}"
        )
    d2 = squared_distances(x[None, :], ref)[0]
    if query.exclude_self:
        if self_index is None:
            raise ValueError("exclude_self requires self_index")
        if np.array_equal(ref[self_index], x):
            d2[self_index] = np.inf
            order = np.argsort(d2, kind="stable")
            return order[order != self_index][: query.k]
    return _rank(d2[None, :], query.k)[0]


def knn_graph(points, k: int) -> np.ndarray:
    """Neighbour lists for every row of ``points`` against the others.

    Row ``i`` of the result holds the ``k`` nearest indices to ``points[i]``
    with ``i`` itself excluded (duplicates of ``i`` at other indices are kept).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or k > n - 1:
        raise ValueError(f"k={k} needs between 1 and {n - 1} other points")
    d2 = squared_distances(points, points)
    d2[np.arange(n), np.arange(n)] = np.inf
    return _rank(d2, k)
