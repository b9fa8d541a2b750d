"""Squared-exponential kernels and the dense linear algebra built on them.

Everything here is a pure function of its inputs. Squared distances are
accumulated one input dimension at a time, so a kernel entry does not depend
on how many rows are evaluated together and ``k(x, z) == k(z, x)`` holds
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import ContractError, FactorizationError

TOL_FLOOR = 1e-12


class Family(str, Enum):
    RBF = "rbf"
    ARD = "ard"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``lengthscales`` holds a single ``l`` for RBF and one value per input
    dimension for ARD. There is no amplitude parameter: the kernel has unit
    prior variance and targets are expected to be standardized.
    """

    family: Family
    lengthscales: tuple[float, ...]
    noise_variance: float

    def __post_init__(self):
        fam = Family(self.family)
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if len(ls) == 0:
            raise ContractError("at least one lengthscale is required")
        if fam is Family.RBF and len(ls) != 1:
            raise ContractError("RBF kernel takes exactly one lengthscale")
        if not all(np.isfinite(v) and v > 0 for v in ls):
            raise ContractError(f"lengthscales must be finite and positive, got {ls}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ContractError(f"noise_variance must be positive, got {self.noise_variance}")

    @classmethod
    def rbf(cls, lengthscale: float, noise_variance: float) -> KernelSpec:
        return cls(Family.RBF, (lengthscale,), noise_variance)

    @classmethod
    def ard(cls, lengthscales: Sequence[float], noise_variance: float) -> KernelSpec:
        return cls(Family.ARD, tuple(lengthscales), noise_variance)

    @property
    def dim(self) -> int | None:
        """Input dimension fixed by the spec, or None for RBF (any dimension)."""
        return len(self.lengthscales) if self.family is Family.ARD else None

    def check_dim(self, d: int) -> None:
        if self.family is Family.ARD and d != len(self.lengthscales):
            raise ContractError(
                f"ARD kernel has {len(self.lengthscales)} lengthscales but inputs have dimension {d}"
            )

    def scale(self) -> np.ndarray:
        return np.asarray(self.lengthscales, dtype=float)

    # log-space parameter vector used by the optimizer: [log lengthscales..., log noise]
    def log_params(self) -> np.ndarray:
        return np.log(np.r_[self.scale(), self.noise_variance])

    def with_log_params(self, theta: np.ndarray) -> KernelSpec:
        theta = np.asarray(theta, dtype=float)
        return KernelSpec(self.family, tuple(np.exp(theta[:-1])), float(np.exp(theta[-1])))

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "lengthscales": list(self.lengthscales),
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> KernelSpec:
        return cls(Family(d["family"]), tuple(d["lengthscales"]), d["noise_variance"])


def _as_points(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ContractError(f"expected a 2-D point matrix, got shape {A.shape}")
    return A


def sq_dist(A, B) -> np.ndarray:
    """Squared Euclidean distances, accumulated dimension by dimension."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ContractError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    out = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        diff = A[:, k, None] - B[None, :, k]
        out += diff * diff
    return out


def eval_kernel(spec: KernelSpec, x, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if x.ndim != 1 or x.shape != z.shape:
        raise ContractError(f"points must be vectors of equal length, got {x.shape} and {z.shape}")
    spec.check_dim(x.shape[0])
    return float(kernel_matrix(spec, x[None, :], z[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Dense ``k(A_i, B_j)`` for every pair of rows."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ContractError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    spec.check_dim(A.shape[1])
    s = spec.scale()
    return np.exp(-0.5 * sq_dist(A / s, B / s))


def kernel_diag(spec: KernelSpec, A) -> np.ndarray:
    return np.ones(_as_points(A).shape[0])


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises FactorizationError naming the failed pivot."""
    A = np.asarray(A, dtype=float)
    c, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(info - 1)
    if info < 0:
        raise ContractError(f"invalid argument {-info} to dpotrf")
    return c


def cho_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return scipy.linalg.cho_solve((L, True), B, check_finite=False)


def jittered_cholesky(K: np.ndarray, base=1e-8, ceiling=1e-4) -> tuple[np.ndarray, float]:
    """Cholesky of ``K + jitter*I`` with jitter = base*mean(diag K), escalated x10.

    Returns the factor and the absolute jitter that was added.
    """
    K = np.asarray(K, dtype=float)
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    rel = base
    last = None
    while rel <= ceiling * (1 + 1e-9):
        jitter = rel * scale
        try:
            return cholesky(K + jitter * np.eye(K.shape[0])), jitter
        except FactorizationError as exc:
            last = exc
            rel *= 10
    raise FactorizationError(
        last.pivot,
        f"matrix not positive definite even with jitter {ceiling:g} x mean diagonal "
        f"(pivot {last.pivot})",
    )


def spd_solve(A, B) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A`` via Cholesky."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ContractError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    asym = np.linalg.norm(A - A.T)
    if asym > max(1e-10 * np.linalg.norm(A), TOL_FLOOR):
        raise ContractError(f"A is not symmetric (asymmetry {asym:.3g})")
    return cho_solve(cholesky(A), B)


def least_squares(A, b) -> np.ndarray:
    """Minimum-norm least squares ``argmin_x ||A x - b||`` (SVD based).

    If the SVD solve fails or returns non-finite values the system is re-solved
    with a ridge of ``1e-10 * ||A||_F^2 / q`` for ``q`` unknowns, through an
    augmented QR so the normal equations are never formed. ``b`` may be a
    vector or a matrix of right-hand sides.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ContractError(f"A must be a non-empty matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ContractError(f"b has {b.shape[0]} rows, A has {A.shape[0]}")
    try:
        x = _gelsd_solve(A, b)
        if np.all(np.isfinite(x)):
            return x
    except (np.linalg.LinAlgError, ValueError):
        pass
    return ridge_least_squares(A, b)


_gelsd, _gelsd_lwork = lapack.get_lapack_funcs(("gelsd", "gelsd_lwork"), dtype=np.float64)
_EPS = float(np.finfo(float).eps)


@lru_cache(maxsize=256)
def _gelsd_work(p: int, q: int, nrhs: int):
    work, iwork, info = _gelsd_lwork(p, q, nrhs, _EPS)
    if info != 0:
        raise np.linalg.LinAlgError(f"gelsd workspace query failed (info={info})")
    return int(work), int(iwork)


def _gelsd_solve(A, b):
    # direct LAPACK call: scipy.linalg.lstsq's checks dominate for the small
    # b x b systems solved once per test point
    p, q = A.shape
    vec = b.ndim == 1
    B = b[:, None] if vec else b
    nrhs = B.shape[1]
    rows = max(p, q)
    B1 = np.zeros((rows, nrhs), order="F")
    B1[:p] = B
    lwork, iwork = _gelsd_work(p, q, nrhs)
    x, _, _, info = _gelsd(np.array(A, order="F"), B1, lwork, iwork, _EPS, False, False)
    if info != 0:
        raise np.linalg.LinAlgError(f"gelsd did not converge (info={info})")
    x = x[:q]
    return x[:, 0] if vec else x


def ridge_least_squares(A, b, rel: float = 1e-10) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    q = A.shape[1]
    fro2 = float(np.sum(A * A))
    if fro2 == 0.0:
        return np.zeros((q,) + b.shape[1:])
    lam = rel * fro2 / q
    A_aug = np.vstack([A, np.sqrt(lam) * np.eye(q)])
    b_aug = np.concatenate([b, np.zeros((q,) + b.shape[1:])])
    x, *_ = scipy.linalg.lstsq(A_aug, b_aug, lapack_driver="gelsy", check_finite=False)
    return x


def fro_diff(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ContractError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B))
