"""Experiment harness: data loading, metrics, timing and scripted runs.

Every experiment takes a :class:`RunConfig` and returns a :class:`Report`.
Reports are deterministic functions of the config (including its seed)
except for the timing figures, which can be switched off with
``timing=False``.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import scipy

from .baselines import fit_kiss1d, fit_sor_fitc, predict_kiss1d, predict_sor_fitc, predict_sor_fitc_point
from .distill import DistillConfig, distill, error_vs_sparsity
from .errors import ContractError, NumericalError
from .exact import Dataset, predict_exact, train_exact
from .inference import predict_arrays, predict_point
from .kernels import KernelSpec, jittered_cholesky, kernel_matrix
from .spatial import kmeans

SCHEMA_VERSION = 1
EXPERIMENTS = ("reconstruct", "toy1d", "bench", "sweep_b")
METHODS = ("exact", "sor", "fitc", "kiss1d", "distill")


class ConfigError(ContractError):
    pass


# ---------------------------------------------------------------------------
# data


def read_numeric_csv(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ContractError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ContractError(f"{path}: line {r} has {len(row)} fields, header has {len(header)}")
            vals = []
            for c, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ContractError(
                        f"{path}: non-numeric value {cell!r} at line {r}, column {header[c]!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ContractError(f"{path}: non-finite value at line {r}, column {header[c]!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ContractError(f"{path} has no data rows")
    return header, np.array(rows, dtype=float)


def load_csv(path: str, target_column: str, standardize: bool = True, seed: int = 0, split: float = 0.8):
    """Read a numeric CSV and return a shuffled ``(train, test)`` pair.

    Standardization statistics come from the training rows only and are
    carried by both datasets.
    """
    if not 0 < split < 1:
        raise ConfigError(f"split must be in (0, 1), got {split}")
    header, table = read_numeric_csv(path)
    if target_column not in header:
        raise ConfigError(f"target column {target_column!r} not in {header}")
    j = header.index(target_column)
    y = table[:, j]
    X = np.delete(table, j, axis=1)
    if X.shape[1] == 0:
        raise ContractError("no input columns besides the target")
    n = len(y)
    if n < 2:
        raise ContractError("need at least two rows to split")
    n_train = int(np.clip(round(split * n), 1, n - 1))
    perm = np.random.default_rng(seed).permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    return split_datasets(X[tr], y[tr], X[te], y[te], standardize)


def split_datasets(X_train, y_train, X_test, y_test, standardize: bool = True):
    train = Dataset.from_arrays(X_train, y_train, standardize=standardize)
    return train, train.with_stats(X_test, y_test)


def write_csv(path: str, columns: dict):
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def reconstruction_inputs(n: int = 1000, seed: int = 0) -> np.ndarray:
    """Sorted draws from N(0, 25) as an n x 1 matrix."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.normal(0.0, 5.0, n))[:, None]


def toy1d_function(x):
    x = np.asarray(x, dtype=float)
    return np.sin(x) * np.exp(-(x ** 2) / (2 * 5.0 ** 2))


def toy1d_data(n: int = 1000, seed: int = 0, noise_sd: float = 1.0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10.0, 10.0, n)
    return x[:, None], toy1d_function(x) + noise_sd * rng.normal(size=n)


def synthetic_rbf(n: int, d: int, lengthscale: float = 3.0, noise_variance: float = 0.05, seed: int = 0):
    """Inputs ~ N(0, I) and targets drawn from a zero-mean RBF GP plus noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    K = kernel_matrix(KernelSpec.rbf(lengthscale, noise_variance), X, X)
    L, _ = jittered_cholesky(K, base=1e-6)
    f = L @ rng.normal(size=n)
    return X, f + np.sqrt(noise_variance) * rng.normal(size=n)


# ---------------------------------------------------------------------------
# metrics


def smse(y_true, y_pred) -> float:
    """Mean squared error over the population variance of ``y_true``."""
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ContractError(f"length mismatch: {y_true.shape[0]} vs {y_pred.shape[0]}")
    if y_true.shape[0] < 2:
        raise ContractError("SMSE needs at least two points")
    var = float(np.mean((y_true - y_true.mean()) ** 2))
    if var == 0.0:
        raise ContractError("SMSE undefined: targets have zero variance")
    return float(np.mean((y_true - y_pred) ** 2)) / var


def variance_rmse(v_exact, v_approx) -> float:
    v_exact = np.asarray(v_exact, dtype=float).reshape(-1)
    v_approx = np.asarray(v_approx, dtype=float).reshape(-1)
    if v_exact.shape != v_approx.shape:
        raise ContractError(f"length mismatch: {v_exact.shape[0]} vs {v_approx.shape[0]}")
    if v_exact.shape[0] < 1:
        raise ContractError("need at least one point")
    return float(np.sqrt(np.mean((v_exact - v_approx) ** 2)))


def abs_error_summary(A, B) -> dict:
    e = np.abs(np.asarray(A) - np.asarray(B)).ravel()
    q1, q2, q3 = np.quantile(e, [0.25, 0.5, 0.75])
    return {"max": float(e.max()), "mean": float(e.mean()), "q25": float(q1), "median": float(q2), "q75": float(q3)}


def time_per_point(fn, points, repeats: int = 5, warmup: int = 10) -> float:
    """Median over ``repeats`` of the mean wall time of ``fn(x)`` per point."""
    points = np.asarray(points)
    for x in points[:warmup]:
        fn(x)
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for x in points:
            fn(x)
        runs.append((time.perf_counter() - t0) / len(points))
    return float(np.median(runs))


def environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "machine": platform.machine(),
        "system": platform.system(),
        "clock": "time.perf_counter",
    }


# ---------------------------------------------------------------------------
# config and report

_DEFAULTS = {
    "reconstruct": dict(n=1000, m=100, b=6, inducing_m=200, grid=400, lengthscale=15.0,
                        noise_variance=0.01, b_list=(5, 6, 7, 8, 9, 10)),
    "toy1d": dict(n=1000, m=100, b=10, grid=400, lengthscale=1.0, noise_variance=0.5, test_points=400,
                  train_steps=100),
    "bench": dict(n=2000, d=8, m=200, b=30, grid=400, lengthscale=5.0, noise_variance=0.05, train_steps=50),
    "sweep_b": dict(n=1000, d=1, m=100, b=10, lengthscale=1.0, noise_variance=0.1,
                    b_list=(5, 10, 15, 20, 25, 30, 35, 40), train_steps=100),
}


@dataclass(frozen=True)
class RunConfig:
    """Settings for one experiment.

    Fields left as None take the experiment's defaults (see :meth:`resolved`).
    ``data``/``target`` select a CSV; otherwise a synthetic set is generated
    from ``n``, ``d``, ``lengthscale`` and ``noise_variance``. ``m`` and ``b``
    configure distillation, ``inducing_m`` the SoR/FITC inducing count
    (default: same as ``m``, and the same k-means points), ``grid`` the
    KISS-1D grid size (400, except for ``sweep_b`` where it defaults to ``m``).
    """

    experiment: str
    data: str | None = None
    target: str | None = None
    methods: tuple = METHODS
    kernel: str = "rbf"
    n: int | None = None
    d: int | None = None
    m: int | None = None
    b: int | None = None
    inducing_m: int | None = None
    grid: int | None = None
    b_list: tuple | None = None
    lengthscale: float | None = None
    noise_variance: float | None = None
    train_steps: int | None = None
    learning_rate: float = 0.05
    iterations: int = 100
    gradient_mode: str = "analytic"
    line_search: bool = True
    eta: float | None = None
    seed: int = 0
    split: float = 0.8
    standardize: bool = True
    test_points: int | None = None
    timing: bool = True
    timing_points: int = 1000
    timing_repeats: int = 5
    output: str | None = None

    def __post_init__(self):
        exp = self.experiment.replace("-", "_")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        object.__setattr__(self, "experiment", exp)
        methods = tuple(self.methods)
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; expected a subset of {METHODS}")
        object.__setattr__(self, "methods", methods)
        if self.b_list is not None:
            object.__setattr__(self, "b_list", tuple(int(b) for b in self.b_list))
        if not 0 < self.split < 1:
            raise ConfigError(f"split must be in (0, 1), got {self.split}")
        if self.kernel not in ("rbf", "ard"):
            raise ConfigError(f"kernel must be 'rbf' or 'ard', got {self.kernel!r}")
        if (self.data is None) != (self.target is None):
            raise ConfigError("data and target must be given together")
        if self.data is not None and not os.path.exists(self.data):
            raise ConfigError(f"data file not found: {self.data}")
        for name in ("n", "d", "m", "b", "inducing_m", "grid", "test_points"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in ("train_steps", "iterations"):
            if getattr(self, name) is not None and getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def resolved(self) -> RunConfig:
        filled = {k: v for k, v in _DEFAULTS[self.experiment].items() if getattr(self, k) is None}
        cfg = replace(self, **filled)
        if cfg.inducing_m is None:
            cfg = replace(cfg, inducing_m=cfg.m)
        if cfg.grid is None:
            # sweep_b: KISS gets the same number of inducing points as the student
            cfg = replace(cfg, grid=cfg.m)
        if cfg.train_steps is None:
            cfg = replace(cfg, train_steps=0)
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("methods", "b_list"):
            if out[k] is not None:
                out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' entry")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str, experiment: str | None = None, **overrides) -> RunConfig:
        """Load a JSON config; ``experiment`` fills in a missing experiment entry
        and must agree with it otherwise."""
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        if experiment is not None:
            given = str(d.setdefault("experiment", experiment)).replace("-", "_")
            if given != experiment.replace("-", "_"):
                raise ConfigError(f"config is for {given!r}, not {experiment!r}")
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


@dataclass
class Report:
    experiment: str
    config: dict
    metrics: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    environment: dict = field(default_factory=environment)

    def check_finite(self):
        for method, vals in self.metrics.items():
            for k, v in vals.items():
                if isinstance(v, float) and not np.isfinite(v):
                    raise NumericalError(f"metric {method}.{k} is not finite")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config": self.config,
            "metrics": self.metrics,
            "curves": {k: {c: list(map(_plain, v)) for c, v in cols.items()} for k, cols in self.curves.items()},
            "traces": self.traces,
            "failures": self.failures,
            "environment": self.environment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path: str) -> list[str]:
        """Write the JSON report and one CSV sidecar per curve; returns the paths."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        written = [path]
        stem = path[:-5] if path.endswith(".json") else path
        for name, cols in sorted(self.curves.items()):
            p = f"{stem}.{name}.csv"
            write_csv(p, cols)
            written.append(p)
        return written


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    return float(v)


# ---------------------------------------------------------------------------
# fitting helpers


def _init_spec(cfg: RunConfig, d: int) -> KernelSpec:
    if cfg.kernel == "ard":
        return KernelSpec.ard([cfg.lengthscale] * d, cfg.noise_variance)
    return KernelSpec.rbf(cfg.lengthscale, cfg.noise_variance)


def _distill_cfg(cfg: RunConfig, b: int | None = None) -> DistillConfig:
    return DistillConfig(
        b=cfg.b if b is None else b,
        m=cfg.m,
        eta=cfg.eta,
        iterations=cfg.iterations,
        gradient_mode=cfg.gradient_mode,
        line_search=cfg.line_search,
    )


def predict_method(method: str, model, Xs) -> tuple[np.ndarray, np.ndarray]:
    """Latent mean and variance in model units for any fitted method."""
    if method == "exact":
        return predict_exact(model, Xs)
    if method in ("sor", "fitc"):
        return predict_sor_fitc(model, Xs)
    if method == "kiss1d":
        return predict_kiss1d(model, Xs)
    if method == "distill":
        mean, var, _ = predict_arrays(model, Xs)
        return mean, var
    raise ContractError(f"unknown method {method!r}")


def point_predictor(method: str, model):
    """Single-point prediction callable used for timing."""
    if method == "distill":
        return lambda x: predict_point(model, x)
    if method in ("sor", "fitc"):
        return lambda x: predict_sor_fitc_point(model, x)
    if method == "exact":
        return lambda x: predict_exact(model, x[None, :])
    if method == "kiss1d":
        return lambda x: predict_kiss1d(model, x[None, :])
    raise ContractError(f"unknown method {method!r}")


def fit_methods(cfg: RunConfig, train: Dataset, report: Report | None = None) -> dict:
    """Train the teacher and fit every requested method on ``train``.

    A failure of one approximate method is recorded in ``report.failures``
    and the others still run; the teacher is required.
    """
    teacher = train_exact(train, _init_spec(cfg, train.d), steps=cfg.train_steps, learning_rate=cfg.learning_rate)
    models = {"exact": teacher}
    U = None
    for method in cfg.methods:
        if method == "exact":
            continue
        try:
            if method in ("sor", "fitc", "distill") and U is None:
                U = kmeans(train.X, cfg.m, cfg.seed)
            if method in ("sor", "fitc"):
                Us = U if cfg.inducing_m == cfg.m else kmeans(train.X, cfg.inducing_m, cfg.seed)
                models[method] = fit_sor_fitc(train, teacher.spec, Us, method)
            elif method == "kiss1d":
                models[method] = fit_kiss1d(train, teacher.spec, cfg.grid)
            elif method == "distill":
                models[method] = distill(teacher, _distill_cfg(cfg), cfg.seed, inducing=U)
        except (ContractError, NumericalError) as exc:
            if report is None:
                raise
            report.failures[method] = f"{type(exc).__name__}: {exc}"
    return models


def _evaluate(cfg: RunConfig, models: dict, test: Dataset, report: Report, timing: bool):
    teacher = models["exact"]
    y_raw = test.raw_y()
    ex_mean, ex_var = predict_exact(teacher, test.X)
    p = min(cfg.timing_points, test.n)
    for method, model in models.items():
        try:
            mean, var = (ex_mean, ex_var) if method == "exact" else predict_method(method, model, test.X)
            entry = {
                "smse": smse(y_raw, test.inverse_y(mean)),
                "variance_rmse": variance_rmse(test.inverse_var(ex_var), test.inverse_var(var)),
            }
            if timing:
                entry["time_per_point"] = time_per_point(point_predictor(method, model), test.X[:p], cfg.timing_repeats)
            report.metrics[method] = entry
        except (ContractError, NumericalError) as exc:
            report.failures[method] = f"{type(exc).__name__}: {exc}"
    if "distill" in models:
        report.traces["distill"] = [r.to_dict() for r in models["distill"].trace]
    report.metrics.setdefault("exact", {})["lml"] = teacher.lml
    report.config["fitted_kernel"] = teacher.spec.to_dict()


def _dataset_for(cfg: RunConfig):
    if cfg.data is not None:
        return load_csv(cfg.data, cfg.target, cfg.standardize, cfg.seed, cfg.split)
    X, y = synthetic_rbf(cfg.n, cfg.d, cfg.lengthscale, cfg.noise_variance, cfg.seed)
    n_train = int(np.clip(round(cfg.split * cfg.n), 2, cfg.n - 1))
    return split_datasets(X[:n_train], y[:n_train], X[n_train:], y[n_train:], cfg.standardize)


# ---------------------------------------------------------------------------
# experiments


def run_reconstruction(cfg: RunConfig) -> Report:
    """Frobenius reconstruction error of one RBF kernel matrix on sorted N(0, 25) inputs."""
    cfg = cfg.resolved()
    if cfg.experiment != "reconstruct":
        raise ConfigError(f"expected a reconstruct config, got {cfg.experiment!r}")
    report = Report("reconstruct", cfg.to_dict())
    X = reconstruction_inputs(cfg.n, cfg.seed)
    data = Dataset.from_arrays(X, np.zeros(cfg.n), standardize=False)
    spec = KernelSpec.rbf(cfg.lengthscale, cfg.noise_variance)
    teacher = train_exact(data, spec, steps=0)
    K = kernel_matrix(spec, X, X)

    U = kmeans(X, cfg.m, cfg.seed)
    dm = distill(teacher, _distill_cfg(cfg), cfg.seed, inducing=U)
    Wc = dm.W.to_csr()
    K_distill = np.asarray(Wc @ (Wc @ dm.K_UU).T)
    sor = fit_sor_fitc(data, spec, kmeans(X, cfg.inducing_m, cfg.seed), "sor")
    kiss = fit_kiss1d(data, spec, cfg.grid)
    approx = {"distill": K_distill, "sor": sor.approx_kernel(), "kiss1d": kiss.approx_kernel()}
    for method, Kt in approx.items():
        report.metrics[method] = {"fro_error": float(np.linalg.norm(K - Kt)), **{
            f"abs_{k}": v for k, v in abs_error_summary(K, Kt).items()}}
    report.metrics["distill"]["objective"] = dm.trace[-1].objective
    report.traces["distill"] = [r.to_dict() for r in dm.trace]

    curve = error_vs_sparsity(teacher, _distill_cfg(cfg), cfg.b_list, cfg.seed, inducing=U)
    report.curves["error_vs_b"] = {"b": [b for b, _ in curve], "error": [e for _, e in curve]}
    report.check_finite()
    return report


def run_toy1d(cfg: RunConfig) -> Report:
    """1-D sin(x)exp(-x^2/50) + N(0, 1) example: exact teacher vs distill vs KISS-1D."""
    cfg = cfg.resolved()
    if cfg.experiment != "toy1d":
        raise ConfigError(f"expected a toy1d config, got {cfg.experiment!r}")
    report = Report("toy1d", cfg.to_dict())
    X, y = toy1d_data(cfg.n, cfg.seed)
    xg = np.linspace(-10.0, 10.0, cfg.test_points)
    rng = np.random.default_rng(cfg.seed + 1)
    yg = toy1d_function(xg) + rng.normal(size=xg.shape[0])
    train, test = split_datasets(X, y, xg[:, None], yg, cfg.standardize)
    run_cfg = replace(cfg, methods=tuple(m for m in cfg.methods if m in ("exact", "distill", "kiss1d")))
    models = fit_methods(run_cfg, train, report)
    _evaluate(run_cfg, models, test, report, timing=False)

    curves = {"x": xg}
    ex_mean = None
    for method, model in models.items():
        mean, var = predict_method(method, model, test.X)
        curves[f"{method}_mean"] = test.inverse_y(mean)
        curves[f"{method}_variance"] = test.inverse_var(var)
        if method == "exact":
            ex_mean = curves["exact_mean"]
    for method in models:
        if method != "exact":
            report.metrics[method]["mean_rmse"] = float(np.sqrt(np.mean((curves[f"{method}_mean"] - ex_mean) ** 2)))
    report.metrics["data"] = {"y_sd": float(np.std(y))}
    report.curves["predictions"] = curves
    report.check_finite()
    return report


def run_benchmark(cfg: RunConfig) -> Report:
    """SMSE, variance error against the teacher and per-point prediction time."""
    cfg = cfg.resolved()
    if cfg.experiment != "bench":
        raise ConfigError(f"expected a bench config, got {cfg.experiment!r}")
    report = Report("bench", cfg.to_dict())
    train, test = _dataset_for(cfg)
    report.config["n_train"], report.config["n_test"], report.config["d"] = train.n, test.n, train.d
    models = fit_methods(cfg, train, report)
    _evaluate(cfg, models, test, report, timing=cfg.timing)
    report.check_finite()
    return report


def run_sweep_b(cfg: RunConfig) -> Report:
    """Distill SMSE and variance error for each sparsity in ``b_list``."""
    cfg = cfg.resolved()
    if cfg.experiment != "sweep_b":
        raise ConfigError(f"expected a sweep_b config, got {cfg.experiment!r}")
    report = Report("sweep_b", cfg.to_dict())
    train, test = _dataset_for(cfg)
    base_methods = tuple(m for m in ("exact", "kiss1d") if m in cfg.methods or m == "exact")
    if train.d != 1:
        base_methods = ("exact",)
    models = fit_methods(replace(cfg, methods=base_methods), train, report)
    teacher = models["exact"]
    ex_mean, ex_var = predict_exact(teacher, test.X)
    y_raw = test.raw_y()
    U = kmeans(train.X, cfg.m, cfg.seed)
    cols = {"b": [], "smse": [], "variance_rmse": []}
    for b in cfg.b_list:
        dm = distill(teacher, _distill_cfg(cfg, b), cfg.seed, inducing=U)
        mean, var, _ = predict_arrays(dm, test.X)
        cols["b"].append(b)
        cols["smse"].append(smse(y_raw, test.inverse_y(mean)))
        cols["variance_rmse"].append(variance_rmse(test.inverse_var(ex_var), test.inverse_var(var)))
    report.curves["sweep"] = cols
    report.metrics["exact"] = {"smse": smse(y_raw, test.inverse_y(ex_mean)), "lml": teacher.lml}
    if "kiss1d" in models:
        mean, var = predict_kiss1d(models["kiss1d"], test.X)
        report.metrics["kiss1d"] = {
            "smse": smse(y_raw, test.inverse_y(mean)),
            "variance_rmse": variance_rmse(test.inverse_var(ex_var), test.inverse_var(var)),
        }
    report.config["fitted_kernel"] = teacher.spec.to_dict()
    report.check_finite()
    return report


RUNNERS = {
    "reconstruct": run_reconstruction,
    "toy1d": run_toy1d,
    "bench": run_benchmark,
    "sweep_b": run_sweep_b,
}


def run(cfg: RunConfig) -> Report:
    return RUNNERS[cfg.experiment](cfg)


def sample_csv_path() -> str:
    """Path of the small bundled CSV (columns x1, x2, x3, y)."""
    return os.path.join(os.path.dirname(__file__), "data", "sample.csv")
