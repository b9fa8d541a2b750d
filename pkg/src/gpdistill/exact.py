"""Exact GP regression: the teacher model.

All modelling happens in standardized coordinates held by :class:`Dataset`;
the prior mean is zero and the kernel has unit amplitude.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import ContractError, FactorizationError, NumericalError
from .kernels import KernelSpec, Family, cholesky, cho_solve, kernel_matrix, sq_dist

log = logging.getLogger(__name__)

MAX_DENSE_N = 20000
NOISE_FLOOR = 1e-8
LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class Dataset:
    """Inputs and targets in model (standardized) units plus the statistics
    needed to map back to original units."""

    X: np.ndarray
    y: np.ndarray
    feature_means: np.ndarray
    feature_sds: np.ndarray
    target_mean: float = 0.0
    target_sd: float = 1.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ContractError(f"X has shape {X.shape} but y has {y.shape[0]} entries")
        if X.shape[0] < 1:
            raise ContractError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ContractError("dataset contains non-finite values")
        fm = np.asarray(self.feature_means, dtype=float).reshape(-1)
        fs = np.asarray(self.feature_sds, dtype=float).reshape(-1)
        if fm.shape[0] != X.shape[1] or fs.shape[0] != X.shape[1]:
            raise ContractError("standardization statistics do not match the input dimension")
        if np.any(fs <= 0) or self.target_sd <= 0:
            raise ContractError("standard deviations must be positive")
        for name, val in (("X", X), ("y", y), ("feature_means", fm), ("feature_sds", fs)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "target_mean", float(self.target_mean))
        object.__setattr__(self, "target_sd", float(self.target_sd))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, X, y, standardize: bool = True) -> Dataset:
        """Build a dataset from raw arrays, optionally standardizing both sides.

        Constant input columns keep sd=1 (with a warning); a constant target is
        an error when standardizing.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float).reshape(-1)
        d = X.shape[1]
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ContractError("dataset contains non-finite values")
        if not standardize:
            return cls(X, y, np.zeros(d), np.ones(d), 0.0, 1.0)
        if X.shape[0] < 2:
            raise ContractError("standardization needs at least two rows")
        fm = X.mean(axis=0)
        fs = X.std(axis=0)
        const = fs <= 0
        if np.any(const):
            warnings.warn(f"constant input columns {np.flatnonzero(const).tolist()}; using sd=1")
            fs = np.where(const, 1.0, fs)
        tm = float(y.mean())
        ts = float(y.std())
        if ts <= 0:
            raise ContractError("target is constant; cannot standardize")
        return cls((X - fm) / fs, (y - tm) / ts, fm, fs, tm, ts)

    def with_stats(self, X, y) -> Dataset:
        """Apply this dataset's standardization to new raw data."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return Dataset(
            self.transform_X(X),
            (np.asarray(y, dtype=float) - self.target_mean) / self.target_sd,
            self.feature_means,
            self.feature_sds,
            self.target_mean,
            self.target_sd,
        )

    def transform_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.d:
            raise ContractError(f"inputs have dimension {X.shape[1]}, dataset has {self.d}")
        return (X - self.feature_means) / self.feature_sds

    def inverse_y(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.target_sd + self.target_mean

    def inverse_var(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) * self.target_sd ** 2

    def raw_X(self) -> np.ndarray:
        return self.X * self.feature_sds + self.feature_means

    def raw_y(self) -> np.ndarray:
        return self.inverse_y(self.y)


@dataclass(frozen=True)
class ExactGPModel:
    data: Dataset
    spec: KernelSpec
    chol: np.ndarray
    alpha: np.ndarray
    lml: float
    history: list = field(default_factory=list, compare=False)


def _factor(X, spec):
    K = kernel_matrix(spec, X, X)
    K[np.diag_indices_from(K)] += spec.noise_variance
    try:
        L = cholesky(K)
    except FactorizationError as exc:
        raise NumericalError(
            f"K_XX + noise*I is not positive definite (pivot {exc.pivot}); "
            f"try a larger noise variance floor"
        ) from exc
    return L


def log_marginal_likelihood(data: Dataset, spec: KernelSpec, grad: bool = True):
    """Zero-mean GP evidence and its gradient w.r.t. the log-hyperparameters.

    The gradient is ordered like :meth:`KernelSpec.log_params`:
    log-lengthscales first, log-noise-variance last.
    """
    X, y = data.X, data.y
    spec.check_dim(X.shape[1])
    n = X.shape[0]
    K0 = kernel_matrix(spec, X, X)
    K = K0.copy()
    K[np.diag_indices_from(K)] += spec.noise_variance
    try:
        L = cholesky(K)
    except FactorizationError as exc:
        raise NumericalError(
            f"K_XX + noise*I is not positive definite (pivot {exc.pivot}); "
            f"try a larger noise variance floor"
        ) from exc
    alpha = cho_solve(L, y)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    if not grad:
        return value, None

    Kinv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NumericalError(f"dpotri failed with info={info}")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    inner = np.outer(alpha, alpha) - Kinv
    R = inner * K0
    ls = spec.scale()
    g = np.empty(len(ls) + 1)
    if spec.family is Family.RBF:
        g[0] = 0.5 * float(np.sum(R * sq_dist(X, X))) / ls[0] ** 2
    else:
        for k in range(len(ls)):
            diff = X[:, k, None] - X[None, :, k]
            g[k] = 0.5 * float(np.sum(R * (diff * diff))) / ls[k] ** 2
    g[-1] = 0.5 * spec.noise_variance * float(np.trace(inner))
    return value, g


def _make_model(data, spec, history=None, lml=None):
    L = _factor(data.X, spec)
    alpha = cho_solve(L, data.y)
    if lml is None:
        lml = log_marginal_likelihood(data, spec, grad=False)[0]
    return ExactGPModel(data, spec, L, alpha, float(lml), history or [])


def train_exact(
    data: Dataset,
    init: KernelSpec,
    steps: int = 200,
    learning_rate: float = 0.05,
    noise_floor: float = NOISE_FLOOR,
) -> ExactGPModel:
    """Maximize the log marginal likelihood with Adam in log-hyperparameter space.

    The returned model carries the best hyperparameters seen, so its evidence
    is never below that of ``init``. ``history`` lists the evidence per step.
    """
    if data.n > MAX_DENSE_N:
        raise ContractError(f"n={data.n} exceeds the dense limit of {MAX_DENSE_N}")
    init.check_dim(data.d)
    if steps <= 0:
        return _make_model(data, init, [])

    theta = init.log_params()
    floor = np.log(noise_floor)
    theta[-1] = max(theta[-1], floor)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)

    value, g = log_marginal_likelihood(data, init.with_log_params(theta))
    best_val, best_theta = value, theta.copy()
    history = [value]
    for t in range(1, steps + 1):
        m1 = beta1 * m1 + (1 - beta1) * g
        m2 = beta2 * m2 + (1 - beta2) * g * g
        step = (m1 / (1 - beta1 ** t)) / (np.sqrt(m2 / (1 - beta2 ** t)) + eps)
        lr = learning_rate
        for _ in range(21):
            cand = theta + lr * step
            cand[-1] = max(cand[-1], floor)
            try:
                new_val, new_g = log_marginal_likelihood(data, init.with_log_params(cand))
            except NumericalError:
                new_val, new_g = np.nan, None
            if np.isfinite(new_val) and np.all(np.isfinite(new_g)):
                break
            lr *= 0.5
        else:
            raise NumericalError("log marginal likelihood stayed non-finite after 20 step halvings")
        theta, value, g = cand, new_val, new_g
        history.append(value)
        if value > best_val:
            best_val, best_theta = value, theta.copy()
    log.debug("train_exact: lml %.6g -> %.6g over %d steps", history[0], best_val, steps)
    return _make_model(data, init.with_log_params(best_theta), history, best_val)


def predict_exact(model: ExactGPModel, Xstar) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at ``Xstar`` (model units)."""
    Xs = np.asarray(Xstar, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    if Xs.shape[1] != model.data.d:
        raise ContractError(f"queries have dimension {Xs.shape[1]}, model has {model.data.d}")
    Ks = kernel_matrix(model.spec, Xs, model.data.X)
    mean = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = 1.0 - np.sum(v * v, axis=0)
    if np.any(var < -1e-10):
        raise NumericalError(f"negative predictive variance {var.min():.3g}")
    return mean, np.maximum(var, 0.0)

