"""Reference approximations: SoR, FITC and one-dimensional KISS-GP.

SoR and FITC share one factorisation. With ``L L^T = K_UU + jitter`` and
``A = L^-1 K_UX`` the training covariance is ``A^T A + Lambda`` where
``Lambda`` is ``s2 I`` (SoR) or ``s2 I + diag(K_XX - A^T A)`` (FITC).
Prediction is folded into an m-vector and an m x m matrix so a test point
costs O(m) for the mean and O(m^2) for the variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.linalg import solve_triangular
from scipy.sparse import csr_matrix

from .errors import ContractError, NumericalError
from .exact import Dataset
from .kernels import KernelSpec, cholesky, jittered_cholesky, kernel_matrix
from .spatial import InducingSet

KEYS_A = -0.5


class Variant(str, Enum):
    SOR = "sor"
    FITC = "fitc"


@dataclass(frozen=True)
class SorFitcModel:
    U: InducingSet
    spec: KernelSpec
    variant: Variant
    K_UU: np.ndarray
    K_XU: np.ndarray
    chol_UU: np.ndarray
    jitter: float
    diag_correction: np.ndarray
    beta: np.ndarray
    C: np.ndarray

    def approx_kernel(self) -> np.ndarray:
        """Noise-free ``K_XU K_UU^-1 K_UX`` (plus the diagonal correction for FITC)."""
        A = solve_triangular(self.chol_UU, self.K_XU.T, lower=True, check_finite=False)
        Q = A.T @ A
        if self.variant is Variant.FITC:
            Q[np.diag_indices_from(Q)] += self.diag_correction
        return Q

    def train_covariance(self) -> np.ndarray:
        Q = self.approx_kernel()
        Q[np.diag_indices_from(Q)] += self.spec.noise_variance
        return Q


def fit_sor_fitc(data: Dataset, spec: KernelSpec, U: InducingSet, variant="fitc") -> SorFitcModel:
    variant = Variant(variant)
    X, y = data.X, data.y
    if U.d != data.d:
        raise ContractError(f"inducing points have dimension {U.d}, data has {data.d}")
    K_UU = kernel_matrix(spec, U.points, U.points)
    K_XU = kernel_matrix(spec, X, U.points)
    L, jitter = jittered_cholesky(K_UU)
    A = solve_triangular(L, K_XU.T, lower=True, check_finite=False)
    q = np.sum(A * A, axis=0)
    corr = 1.0 - q
    if np.any(corr < -1e-8):
        raise NumericalError(f"Nystrom diagonal exceeds the prior variance by {-corr.min():.3g}")
    corr = np.maximum(corr, 0.0)
    lam = np.full(data.n, spec.noise_variance)
    if variant is Variant.FITC:
        lam = lam + corr
    else:
        corr = np.zeros(data.n)
    m = U.m
    B = np.eye(m) + (A / lam) @ A.T
    LB = cholesky(B)
    c = scipy.linalg.cho_solve((LB, True), A @ (y / lam), check_finite=False)
    beta = solve_triangular(L, c, lower=True, trans="T", check_finite=False)
    Linv = solve_triangular(L, np.eye(m), lower=True, check_finite=False)
    Binv = scipy.linalg.cho_solve((LB, True), np.eye(m), check_finite=False)
    inner = Binv - np.eye(m) if variant is Variant.FITC else Binv
    C = Linv.T @ inner @ Linv
    C = 0.5 * (C + C.T)
    return SorFitcModel(U, spec, variant, K_UU, K_XU, L, jitter, corr, beta, C)


def predict_sor_fitc(model: SorFitcModel, Xstar) -> tuple[np.ndarray, np.ndarray]:
    Xs = np.asarray(Xstar, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    Ks = kernel_matrix(model.spec, Xs, model.U.points)
    mean = Ks @ model.beta
    quad = np.einsum("ij,jk,ik->i", Ks, model.C, Ks)
    prior = 1.0 if model.variant is Variant.FITC else 0.0
    return mean, np.maximum(prior + quad, 0.0)


def predict_sor_fitc_point(model: SorFitcModel, xstar) -> tuple[float, float]:
    """Single-point prediction (used for per-point timing)."""
    ks = kernel_matrix(model.spec, np.asarray(xstar, dtype=float).reshape(1, -1), model.U.points)[0]
    mean = float(ks @ model.beta)
    prior = 1.0 if model.variant is Variant.FITC else 0.0
    return mean, max(prior + float(ks @ model.C @ ks), 0.0)


# ---------------------------------------------------------------------------
# KISS-GP in one dimension


def keys_kernel(t, a: float = KEYS_A):
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    near = t <= 1
    far = (t > 1) & (t < 2)
    tn, tf = t[near], t[far]
    out[near] = (a + 2) * tn ** 3 - (a + 3) * tn ** 2 + 1
    out[far] = a * tf ** 3 - 5 * a * tf ** 2 + 8 * a * tf - 4 * a
    return out


@dataclass(frozen=True)
class Grid1D:
    start: float
    spacing: float
    size: int

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.size)

    @classmethod
    def covering(cls, x, size: int) -> Grid1D:
        """Regular grid over ``[min(x) - 2h, max(x) + 2h]`` with ``size`` nodes."""
        if size < 4:
            raise ContractError(f"grid needs at least 4 points, got {size}")
        lo, hi = float(np.min(x)), float(np.max(x))
        span = hi - lo
        if span <= 0:
            span = 1.0
        h = span / (size - 5) if size > 5 else span
        return cls(lo - 2 * h, h, size)


def interp_weights(grid: Grid1D, x) -> csr_matrix:
    """Cubic-convolution weights of ``x`` on ``grid`` (at most 4 per row).

    Nodes outside the grid are dropped, so rows near or beyond the edges have
    fewer entries and queries far outside get an empty row.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    s = (x - grid.start) / grid.spacing
    base = np.floor(s).astype(np.int64)
    rows, cols, vals = [], [], []
    for off in (-1, 0, 1, 2):
        j = base + off
        w = keys_kernel(s - j)
        ok = (j >= 0) & (j < grid.size)
        rows.append(np.flatnonzero(ok))
        cols.append(j[ok])
        vals.append(w[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    W = csr_matrix((vals, (rows, cols)), shape=(x.shape[0], grid.size))
    W.sort_indices()
    return W


@dataclass(frozen=True)
class Kiss1dModel:
    grid: Grid1D
    spec: KernelSpec
    W_interp: csr_matrix
    K_UU: np.ndarray
    alpha_tilde: np.ndarray
    V: np.ndarray

    def approx_kernel(self) -> np.ndarray:
        W = self.W_interp
        return np.asarray(W @ (W @ self.K_UU).T)


def fit_kiss1d(data: Dataset, spec: KernelSpec, grid_size: int) -> Kiss1dModel:
    """SKI with cubic interpolation onto a regular 1-D grid.

    Uses ``K_UU W^T (W K_UU W^T + s2 I)^-1 = (K_UU W^T W + s2 I)^-1 K_UU W^T``
    so only m x m systems are solved.
    """
    if data.d != 1:
        raise ContractError(f"KISS-1D needs one-dimensional inputs, got d={data.d}")
    grid = Grid1D.covering(data.X[:, 0], grid_size)
    W = interp_weights(grid, data.X[:, 0])
    K = kernel_matrix(spec, grid.nodes[:, None], grid.nodes[:, None])
    WtW = np.asarray((W.T @ W).todense())
    KWt = np.asarray((W @ K).T)
    M = K @ WtW
    M[np.diag_indices_from(M)] += spec.noise_variance
    lu = scipy.linalg.lu_factor(M, check_finite=False)
    alpha_tilde = scipy.linalg.lu_solve(lu, KWt @ data.y, check_finite=False)
    V = scipy.linalg.lu_solve(lu, K @ WtW @ K, check_finite=False)
    V = 0.5 * (V + V.T)
    return Kiss1dModel(grid, spec, W, K, alpha_tilde, V)


def predict_kiss1d(model: Kiss1dModel, Xstar) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance with every covariance (including the test prior) taken
    from the interpolated kernel."""
    x = np.asarray(Xstar, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ContractError(f"KISS-1D needs one-dimensional inputs, got d={x.shape[1]}")
        x = x[:, 0]
    Ws = interp_weights(model.grid, x)
    mean = np.asarray(Ws @ model.alpha_tilde).reshape(-1)
    WK = np.asarray(Ws @ model.K_UU)
    WV = np.asarray(Ws @ model.V)
    prior = np.asarray(Ws.multiply(WK).sum(axis=1)).reshape(-1)
    quad = np.asarray(Ws.multiply(WV).sum(axis=1)).reshape(-1)
    return mean, np.maximum(prior - quad, 0.0)
