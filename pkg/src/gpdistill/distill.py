"""Kernel distillation: fit ``K_XX ~ W K_UU W^T`` with row-sparse ``W``.

``W`` is initialised row by row with a least-squares fit of ``K_XU`` on the
``b`` nearest inducing points, then refined by gradient descent whose steps
are projected onto the fixed supports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ContractError, NumericalError
from .exact import MAX_DENSE_N, ExactGPModel
from .inference import DistilledModel, SparseWeights, precompute
from .kernels import kernel_matrix, least_squares
from .spatial import InducingSet, kmeans

log = logging.getLogger(__name__)

MAX_BACKTRACKS = 30


class GradientMode(str, Enum):
    ANALYTIC = "analytic"  # exact gradient of ||E||_F^2
    PAPER = "paper"  # E_ii <- 2 E_ii ; grad <- E^T W K_UU


@dataclass(frozen=True)
class DistillConfig:
    b: int = 10
    m: int = 100
    eta: float | None = None
    iterations: int = 100
    gradient_mode: GradientMode = GradientMode.ANALYTIC
    line_search: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gradient_mode", GradientMode(self.gradient_mode))
        if self.b < 1:
            raise ContractError(f"b must be >= 1, got {self.b}")
        if self.m < 1:
            raise ContractError(f"m must be >= 1, got {self.m}")
        if self.iterations < 0:
            raise ContractError(f"iterations must be >= 0, got {self.iterations}")
        if self.eta is not None and not self.eta > 0:
            raise ContractError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class IterRecord:
    iteration: int
    objective: float
    step_size: float

    def to_dict(self):
        return {"iteration": self.iteration, "objective": self.objective, "step_size": self.step_size}


def init_weights(K_XU, K_UU, U: InducingSet, X, b: int) -> SparseWeights:
    """Row ``i`` gets support ``J_i`` = its ``b`` nearest inducing points and
    values ``argmin_w ||w K_UU[J_i, :] - K_XU[i, :]||``."""
    K_XU = np.asarray(K_XU, dtype=float)
    K_UU = np.asarray(K_UU, dtype=float)
    m = K_UU.shape[0]
    if K_XU.shape[1] != m:
        raise ContractError(f"K_XU has {K_XU.shape[1]} columns, K_UU is {m}x{m}")
    if b > m:
        raise ContractError(f"b={b} exceeds m={m}")
    idx, _ = U.knn_batch(X, b)
    support = np.sort(idx, axis=1)
    values = np.empty(support.shape)
    for i, J in enumerate(support):
        values[i] = least_squares(K_UU[J].T, K_XU[i])
    return SparseWeights(support, values, m)


def _student(Wc, K_UU):
    WK = np.asarray(Wc @ K_UU)
    return WK, np.asarray(Wc @ WK.T)


def objective(K_XX, W: SparseWeights, K_UU) -> float:
    """``||K_XX - W K_UU W^T||_F`` using sparse row products."""
    _, M = _student(W.to_csr(), K_UU)
    return float(np.linalg.norm(K_XX - M))


def _grad_from(E, WK, mode):
    mode = GradientMode(mode)
    if mode is GradientMode.ANALYTIC:
        return 4.0 * (E @ WK)
    E2 = E.copy()
    E2[np.diag_indices_from(E2)] *= 2.0
    return E2.T @ WK


def gradient(K_XX, W: SparseWeights, K_UU, mode=GradientMode.ANALYTIC) -> np.ndarray:
    """Dense ``n x m`` gradient before projection.

    ``analytic`` is the exact gradient ``4 E W K_UU`` of ``||E||_F^2`` with
    ``E = W K_UU W^T - K_XX``. ``paper`` doubles the diagonal of ``E`` and
    returns ``E^T W K_UU``.
    """
    WK, M = _student(W.to_csr(), K_UU)
    return _grad_from(M - K_XX, WK, mode)


def project_rows(G, support) -> np.ndarray:
    """Entries of ``G`` on each row's support, in the layout of ``SparseWeights.values``."""
    sup = support.support if isinstance(support, SparseWeights) else np.asarray(support)
    return np.take_along_axis(np.asarray(G), sup, axis=1)


def _quartic_step(E, S, B):
    # ||E - tS + t^2 B||^2 = c0 + c1 t + c2 t^2 + c3 t^3 + c4 t^4
    es, ss, eb = np.vdot(E, S), np.vdot(S, S), np.vdot(E, B)
    sb, bb = np.vdot(S, B), np.vdot(B, B)
    c = np.array([bb, -2 * sb, ss + 2 * eb, -2 * es, np.vdot(E, E)])
    roots = np.roots([4 * c[0], 3 * c[1], 2 * c[2], c[3]]) if c[0] > 0 else np.roots([2 * c[2], c[3]])
    cands = [r.real for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r.real)) and r.real > 0]
    if not cands:
        return 0.0
    return float(min(cands, key=lambda t: np.polyval(c, t)))


def default_eta(n: int, K_UU) -> float:
    return 1e-4 * n / float(np.linalg.norm(K_UU))


def optimize_weights(K_XX, W: SparseWeights, K_UU, cfg: DistillConfig):
    """Projected gradient descent on the fixed supports of ``W``.

    Returns the final weights and a list of :class:`IterRecord`; record 0 is
    the objective at initialisation.
    """
    eta = cfg.eta if cfg.eta is not None else default_eta(W.n, K_UU)
    Wc = W.to_csr()
    WK, M = _student(Wc, K_UU)
    E = M - K_XX
    f = float(np.linalg.norm(E))
    trace = [IterRecord(0, f, 0.0)]
    for t in range(1, cfg.iterations + 1):
        P = W.with_values(project_rows(_grad_from(E, WK, cfg.gradient_mode), W))
        if not np.any(P.values):
            break
        Pc = P.to_csr()
        if cfg.line_search:
            PK = np.asarray(Pc @ K_UU)
            A = np.asarray(Wc @ PK.T)
            step = _quartic_step(E, A + A.T, np.asarray(Pc @ PK.T))
            accepted = False
            for _ in range(MAX_BACKTRACKS + 1):
                if step <= 0:
                    break
                cand = W.with_values(W.values - step * P.values)
                cWc = cand.to_csr()
                cWK, cM = _student(cWc, K_UU)
                cE = cM - K_XX
                cf = float(np.linalg.norm(cE))
                if np.isfinite(cf) and cf < f:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                log.debug("line search found no decrease at iteration %d; stopping", t)
                break
        else:
            step = eta
            cand = W.with_values(W.values - step * P.values)
            cWc = cand.to_csr()
            cWK, cM = _student(cWc, K_UU)
            cE = cM - K_XX
            cf = float(np.linalg.norm(cE))
            if not np.isfinite(cf):
                raise NumericalError(
                    f"objective became non-finite at iteration {t}; try a smaller step size (eta={eta:g})"
                )
        W, Wc, WK, E, f = cand, cWc, cWK, cE, cf
        trace.append(IterRecord(t, f, step))
    return W, trace


def distill(
    teacher: ExactGPModel,
    cfg: DistillConfig,
    seed: int = 0,
    inducing: InducingSet | None = None,
) -> DistilledModel:
    """Compress a trained exact GP into a sparse low-rank student.

    ``inducing`` overrides the k-means selection of inducing points (its size
    then replaces ``cfg.m``). The iteration log is attached as ``model.trace``.
    """
    data = teacher.data
    if data.n > MAX_DENSE_N:
        raise ContractError(f"n={data.n} exceeds the dense limit of {MAX_DENSE_N}")
    X = data.X
    spec = teacher.spec
    U = inducing if inducing is not None else kmeans(X, cfg.m, seed)
    if cfg.b > U.m:
        raise ContractError(f"b={cfg.b} exceeds m={U.m}")
    K_XX = kernel_matrix(spec, X, X)
    K_UU = kernel_matrix(spec, U.points, U.points)
    K_XU = kernel_matrix(spec, X, U.points)
    W = init_weights(K_XU, K_UU, U, X, cfg.b)
    del K_XU
    W, trace = optimize_weights(K_XX, W, K_UU, cfg)
    del K_XX
    alpha_tilde, V = precompute(data, W, K_UU, spec.noise_variance)
    return DistilledModel(
        U=U,
        spec=spec,
        K_UU=K_UU,
        alpha_tilde=alpha_tilde,
        V=V,
        b=W.b,
        feature_means=data.feature_means,
        feature_sds=data.feature_sds,
        target_mean=data.target_mean,
        target_sd=data.target_sd,
        W=W,
        trace=trace,
    )


def error_vs_sparsity(teacher: ExactGPModel, cfg: DistillConfig, b_list, seed: int = 0,
                      inducing: InducingSet | None = None) -> list[tuple[int, float]]:
    """Final objective for each sparsity in ``b_list`` (ascending).

    The inducing set is selected once and shared by every run.
    """
    b_list = [int(b) for b in b_list]
    if any(b2 < b1 for b1, b2 in zip(b_list, b_list[1:])):
        raise ContractError("b_list must be ascending")
    U = inducing if inducing is not None else kmeans(teacher.data.X, cfg.m, seed)
    out = []
    for b in b_list:
        model = distill(teacher, replace(cfg, b=b), seed, inducing=U)
        out.append((b, model.trace[-1].objective))
    return out

