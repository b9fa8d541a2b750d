"""Inducing-point selection (k-means) and exact b-nearest-neighbour search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContractError
from .kernels import sq_dist

LEAF_SIZE = 16
# relative slack when checking for distance ties at the k-th neighbour
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class NeighborList:
    indices: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return len(self.indices)


class InducingSet:
    """Immutable set of ``m`` inducing points indexed by a KD-tree.

    The tree splits at the median of the widest-spread dimension with leaves of
    16 points. Candidate neighbours come from the tree; the final ordering uses
    the package's own squared distances with ties broken by smaller id, so
    results agree with a plain linear scan.
    """

    __slots__ = ("points", "_tree")

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ContractError(f"inducing points must be a non-empty m x d matrix, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ContractError("inducing points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_tree", cKDTree(pts, leafsize=LEAF_SIZE, balanced_tree=True))

    def __setattr__(self, name, value):
        raise AttributeError("InducingSet is immutable")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __repr__(self):
        return f"InducingSet(m={self.m}, d={self.d})"

    def knn(self, query, b: int) -> NeighborList:
        """Exact ``b`` nearest inducing points to ``query``, nearest first.

        If ``b > m`` all ``m`` points are returned.
        """
        q = np.asarray(query, dtype=float).reshape(-1)
        if q.shape[0] != self.d:
            raise ContractError(f"query has dimension {q.shape[0]}, inducing set has {self.d}")
        if b < 1:
            raise ContractError(f"b must be >= 1, got {b}")
        k = min(int(b), self.m)
        kq = min(self.m, k + 1)
        if kq == k:
            idx, d2 = self._knn_rows(q[None, :], b)
            return NeighborList(idx[0], np.sqrt(d2[0]))
        # single-query fast path; falls back to the batch code on a boundary tie
        _, cand = self._tree.query(q, k=kq)
        cand = np.asarray(cand, dtype=np.intp)
        sel = self.points[cand]
        d2 = np.zeros(kq)
        for j in range(self.d):
            diff = sel[:, j] - q[j]
            d2 += diff * diff
        order = np.lexsort((cand, d2))
        d2 = d2[order]
        if d2[k] <= d2[k - 1] * (1 + _TIE_RTOL) + 1e-300:
            idx, d2 = self._knn_rows(q[None, :], b)
            return NeighborList(idx[0], np.sqrt(d2[0]))
        return NeighborList(cand[order[:k]], np.sqrt(d2[:k]))

    def knn_batch(self, Q, b: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour ids and distances for each row of ``Q`` (arrays of shape p x k)."""
        Q = np.asarray(Q, dtype=float)
        if Q.ndim == 1:
            Q = Q[:, None]
        if Q.shape[1] != self.d:
            raise ContractError(f"queries have dimension {Q.shape[1]}, inducing set has {self.d}")
        idx, d2 = self._knn_rows(Q, b)
        return idx, np.sqrt(d2)

    def _knn_rows(self, Q, b):
        if b < 1:
            raise ContractError(f"b must be >= 1, got {b}")
        k = min(int(b), self.m)
        kq = min(self.m, k + 1)
        _, cand = self._tree.query(Q, k=kq)
        cand = np.asarray(cand, dtype=np.intp).reshape(Q.shape[0], kq)
        d2 = self._row_sq_dist(Q, cand)
        order = np.lexsort((cand, d2), axis=-1)
        cand = np.take_along_axis(cand, order, axis=-1)
        d2 = np.take_along_axis(d2, order, axis=-1)

        out_idx = cand[:, :k].copy()
        out_d2 = d2[:, :k].copy()
        if kq > k:
            # a tie at the boundary may hide further equidistant points with smaller ids
            tied = d2[:, k] <= d2[:, k - 1] * (1 + _TIE_RTOL) + 1e-300
            for r in np.flatnonzero(tied):
                radius = np.sqrt(d2[r, k - 1]) * (1 + _TIE_RTOL) + 1e-150
                ball = np.asarray(self._tree.query_ball_point(Q[r], radius), dtype=np.intp)
                ball = np.union1d(ball, cand[r])
                bd2 = self._row_sq_dist(Q[r:r + 1], ball[None, :])[0]
                o = np.lexsort((ball, bd2))[:k]
                out_idx[r] = ball[o]
                out_d2[r] = bd2[o]
        return out_idx, out_d2

    def _row_sq_dist(self, Q, cand):
        out = np.zeros(cand.shape)
        for j in range(self.d):
            diff = self.points[cand, j] - Q[:, j, None]
            out += diff * diff
        return out


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    wcss_trace: list = field(default_factory=list)
    iterations: int = 0


def _kmeanspp(X, m, rng):
    n = X.shape[0]
    centers = np.empty((m, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = sq_dist(X, X[first:first + 1])[:, 0]
    for c in range(1, m):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(n, p=closest / total))
        else:
            pick = int(rng.integers(n))
        centers[c] = X[pick]
        closest = np.minimum(closest, sq_dist(X, X[pick:pick + 1])[:, 0])
    return centers


def kmeans_fit(X, m: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-9) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are re-seeded at the point farthest from its assigned
    centroid. ``wcss_trace`` records the within-cluster sum of squares of the
    nearest-centroid assignment at every iteration and is non-increasing.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ContractError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(X, m, rng)
    scale = float(np.max(np.ptp(X, axis=0))) or 1.0
    trace = []
    labels = np.zeros(n, dtype=np.intp)
    it = 0
    for it in range(1, max_iter + 1):
        D = sq_dist(X, centers)
        labels = np.argmin(D, axis=1)
        point_cost = D[np.arange(n), labels]
        trace.append(float(point_cost.sum()))

        counts = np.bincount(labels, minlength=m)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        new = centers.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not np.all(nonempty):
            cost = point_cost.copy()
            for c in np.flatnonzero(~nonempty):
                far = int(np.argmax(cost))
                new[c] = X[far]
                cost[far] = 0.0
        shift = float(np.max(np.sqrt(np.sum((new - centers) ** 2, axis=1))))
        centers = new
        if shift < tol * scale and np.all(nonempty):
            break
    # final assignment so every centroid is the mean of its (non-empty) cluster
    D = sq_dist(X, centers)
    labels = np.argmin(D, axis=1)
    return KMeansResult(centers, labels, trace, it)


def kmeans(X, m: int, seed: int = 0) -> InducingSet:
    return InducingSet(kmeans_fit(X, m, seed).centroids)
