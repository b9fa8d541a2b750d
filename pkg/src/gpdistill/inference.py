"""Prediction from a distilled model in O(b log m + b^3) per test point.

The heavy lifting happens once in :func:`precompute`, which folds the n x n
solve into an m-vector ``alpha_tilde`` and an m x m matrix ``V``. A test point
then only touches its ``b`` nearest inducing points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .errors import ContractError, FactorizationError, NumericalError
from .kernels import KernelSpec, cholesky, cho_solve, jittered_cholesky, kernel_matrix, least_squares
from .spatial import InducingSet, NeighborList


@dataclass(frozen=True)
class SparseWeights:
    """Row-sparse ``n x m`` matrix with a fixed support per row.

    ``support[i]`` holds the (ascending, distinct) inducing ids of row ``i``
    and ``values[i]`` the matching entries. Every row has the same support
    size ``min(b, m)``.
    """

    support: np.ndarray
    values: np.ndarray
    m: int

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.intp)
        val = np.asarray(self.values, dtype=float)
        if sup.ndim != 2 or sup.shape != val.shape:
            raise ContractError(f"support {sup.shape} and values {val.shape} must be equal 2-D shapes")
        if sup.size and (sup.min() < 0 or sup.max() >= self.m):
            raise ContractError("support ids out of range")
        if sup.shape[1] > 1 and np.any(np.diff(sup, axis=1) <= 0):
            raise ContractError("support ids must be strictly ascending per row")
        sup.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", val)

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def b(self) -> int:
        return self.support.shape[1]

    def with_values(self, values) -> SparseWeights:
        return SparseWeights(self.support, np.asarray(values, dtype=float), self.m)

    def to_csr(self):
        n, k = self.support.shape
        indptr = np.arange(0, n * k + 1, k)
        return csr_matrix((self.values.ravel(), self.support.ravel(), indptr), shape=(n, self.m))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.m))
        np.put_along_axis(out, self.support, self.values, axis=1)
        return out


@dataclass(frozen=True)
class PredictionResult:
    mean: float
    variance: float
    support_used: NeighborList
    clamp_flag: bool


@dataclass(frozen=True)
class DistilledModel:
    """Student model. Only ``U``, ``spec``, ``K_UU``, ``alpha_tilde``, ``V``,
    ``b`` and the standardization statistics are needed to predict; ``W`` and
    ``trace`` are kept for diagnostics and are not part of the inference bundle.
    """

    U: InducingSet
    spec: KernelSpec
    K_UU: np.ndarray
    alpha_tilde: np.ndarray
    V: np.ndarray
    b: int
    feature_means: np.ndarray = None
    feature_sds: np.ndarray = None
    target_mean: float = 0.0
    target_sd: float = 1.0
    W: SparseWeights | None = field(default=None, compare=False, repr=False)
    trace: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        d = self.U.d
        if self.feature_means is None:
            object.__setattr__(self, "feature_means", np.zeros(d))
        if self.feature_sds is None:
            object.__setattr__(self, "feature_sds", np.ones(d))

    @property
    def m(self) -> int:
        return self.U.m

    @property
    def d(self) -> int:
        return self.U.d

    def transform_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return (X - self.feature_means) / self.feature_sds


def precompute(data, W: SparseWeights, K_UU: np.ndarray, noise_variance: float):
    """``alpha_tilde = K_UU W^T (K~ + s2 I)^-1 y`` and ``V = K_UU W^T (K~ + s2 I)^-1 W K_UU``
    with ``K~ = W K_UU W^T``, via a dense Cholesky of the n x n system."""
    y = data.y if hasattr(data, "y") else np.asarray(data, dtype=float)
    Wc = W.to_csr()
    WK = np.asarray(Wc @ K_UU)
    Kt = np.asarray(Wc @ WK.T)
    Kt = 0.5 * (Kt + Kt.T)
    Kt[np.diag_indices_from(Kt)] += noise_variance
    try:
        L = cholesky(Kt)
    except FactorizationError:
        L, _ = jittered_cholesky(Kt)
    Z = cho_solve(L, np.column_stack([y, WK]))
    alpha_tilde = WK.T @ Z[:, 0]
    V = WK.T @ Z[:, 1:]
    V = 0.5 * (V + V.T)
    return alpha_tilde, V


def solve_test_weights(model: DistilledModel, xstar, restrict: str = "bxb"):
    """Sparse weight row for a test point (model units).

    Returns ``(neighbors, support, values)`` where ``support`` is ascending.
    ``restrict="bxb"`` solves against ``K_UU[J, J]``; ``"bxm"`` against the
    full rows ``K_UU[J, :]``.
    """
    x = np.asarray(xstar, dtype=float).reshape(-1)
    nb = model.U.knn(x, model.b)
    J = np.sort(nb.indices)
    if restrict == "bxb":
        A = model.K_UU[J[:, None], J]
        rhs = kernel_matrix(model.spec, x[None, :], model.U.points[J])[0]
    elif restrict == "bxm":
        A = model.K_UU[J].T
        rhs = kernel_matrix(model.spec, x[None, :], model.U.points)[0]
    else:
        raise ContractError(f"unknown restriction {restrict!r}")
    return nb, J, least_squares(A, rhs)


def dense_test_row(model: DistilledModel, xstar, restrict: str = "bxb") -> np.ndarray:
    _, J, w = solve_test_weights(model, xstar, restrict)
    row = np.zeros(model.m)
    row[J] = w
    return row


def predict_point(model: DistilledModel, xstar, restrict: str = "bxb") -> PredictionResult:
    """Mean ``W* alpha_tilde`` (O(b)) and variance ``k** - W* V W*^T`` (O(b^2))."""
    nb, J, w = solve_test_weights(model, xstar, restrict)
    mean = float(w @ model.alpha_tilde[J])
    raw = 1.0 - float(w @ model.V[J[:, None], J] @ w)
    if not np.isfinite(raw) or not np.isfinite(mean):
        raise NumericalError("non-finite prediction")
    return PredictionResult(mean, max(raw, 0.0), nb, raw < 0)


def predict_batch(model: DistilledModel, Xstar, restrict: str = "bxb") -> list[PredictionResult]:
    Xs = np.asarray(Xstar, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    if Xs.shape[1] != model.d:
        raise ContractError(f"queries have dimension {Xs.shape[1]}, model has {model.d}")
    return [predict_point(model, x, restrict) for x in Xs]


def predict_arrays(model: DistilledModel, Xstar, restrict: str = "bxb"):
    """Batch prediction as ``(mean, variance, clamped)`` arrays."""
    res = predict_batch(model, Xstar, restrict)
    return (
        np.array([r.mean for r in res]),
        np.array([r.variance for r in res]),
        np.array([r.clamp_flag for r in res], dtype=bool),
    )
