"""High-level operations shared by the command line and the HTTP service.

Inputs and outputs here are in original (raw) units; standardization is
applied and undone internally.
"""

from __future__ import annotations

import numpy as np

from .distill import DistillConfig, distill
from .errors import ContractError
from .exact import Dataset, ExactGPModel, predict_exact, train_exact
from .harness import read_numeric_csv
from .inference import DistilledModel, predict_arrays
from .kernels import KernelSpec


def initial_spec(kernel: str, d: int, lengthscale: float = 1.0, noise_variance: float = 0.1) -> KernelSpec:
    if kernel == "rbf":
        return KernelSpec.rbf(lengthscale, noise_variance)
    if kernel == "ard":
        return KernelSpec.ard([lengthscale] * d, noise_variance)
    raise ContractError(f"kernel must be 'rbf' or 'ard', got {kernel!r}")


def read_table(path: str, target: str | None = None, d: int | None = None):
    """Feature matrix (and the target column if named) from a CSV file."""
    header, table = read_numeric_csv(path)
    y = None
    if target is not None:
        if target not in header:
            raise ContractError(f"target column {target!r} not in {header}")
        j = header.index(target)
        y = table[:, j]
        table = np.delete(table, j, axis=1)
    if d is not None and table.shape[1] != d:
        raise ContractError(f"{path} has {table.shape[1]} feature columns, model expects {d}")
    return table, y


def train_teacher(X, y, kernel: str = "rbf", lengthscale: float = 1.0, noise_variance: float = 0.1,
                  steps: int = 200, learning_rate: float = 0.05, standardize: bool = True) -> ExactGPModel:
    data = Dataset.from_arrays(X, y, standardize=standardize)
    spec = initial_spec(kernel, data.d, lengthscale, noise_variance)
    return train_exact(data, spec, steps=steps, learning_rate=learning_rate)


def distill_teacher(teacher: ExactGPModel, m: int = 100, b: int = 10, mode: str = "analytic",
                    eta: float | None = None, iterations: int = 100, line_search: bool = True,
                    seed: int = 0) -> DistilledModel:
    if not isinstance(teacher, ExactGPModel):
        raise ContractError("distillation needs a teacher (GPEXACT1) model")
    if m > teacher.data.n:
        raise ContractError(f"m={m} exceeds the number of training points {teacher.data.n}")
    cfg = DistillConfig(b=b, m=m, eta=eta, iterations=iterations, gradient_mode=mode, line_search=line_search)
    return distill(teacher, cfg, seed)


def model_dim(model) -> int:
    if isinstance(model, DistilledModel):
        return model.d
    if isinstance(model, ExactGPModel):
        return model.data.d
    raise ContractError(f"unsupported model type {type(model).__name__}")


def predict_raw(model, X):
    """``(mean, variance, clamped)`` in original target units for raw inputs."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != model_dim(model):
        raise ContractError(f"inputs have shape {X.shape}, model expects {model_dim(model)} columns")
    if not np.all(np.isfinite(X)):
        raise ContractError("inputs contain non-finite values")
    if isinstance(model, DistilledModel):
        mean, var, clamped = predict_arrays(model, model.transform_X(X))
        ts, tm = model.target_sd, model.target_mean
    else:
        data = model.data
        mean, var = predict_exact(model, data.transform_X(X))
        clamped = np.zeros(mean.shape[0], dtype=bool)
        ts, tm = data.target_sd, data.target_mean
    return mean * ts + tm, var * ts ** 2, clamped


def describe(model) -> dict:
    if isinstance(model, DistilledModel):
        return {"kind": "distilled", "d": model.d, "m": model.m, "b": model.b, "kernel": model.spec.to_dict()}
    return {"kind": "exact", "d": model.data.d, "n": model.data.n, "lml": model.lml,
            "kernel": model.spec.to_dict()}
