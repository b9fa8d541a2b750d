import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdistill.distill import (
    DistillConfig,
    distill,
    error_vs_sparsity,
    gradient,
    init_weights,
    objective,
    optimize_weights,
    project_rows,
)
from gpdistill.errors import ContractError, NumericalError
from gpdistill.exact import Dataset, train_exact
from gpdistill.inference import SparseWeights
from gpdistill.io import distilled_to_bytes
from gpdistill.kernels import KernelSpec, kernel_matrix
from gpdistill.spatial import InducingSet


def instance(n, m, d=1, seed=0, ls=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    U = InducingSet(rng.normal(size=(m, d)))
    spec = KernelSpec.rbf(ls, 0.1)
    return X, U, spec, kernel_matrix(spec, X, X), kernel_matrix(spec, U.points, U.points), kernel_matrix(spec, X, U.points)


def full_support(W_dense):
    n, m = W_dense.shape
    return SparseWeights(np.tile(np.arange(m), (n, 1)), W_dense, m)


def teacher(X, y, spec):
    return train_exact(Dataset.from_arrays(X, y, standardize=False), spec, steps=0)


def test_init_full_support_is_dense_solve():
    X, U, spec, _, K_UU, K_XU = instance(9, 4, seed=1)
    W = init_weights(K_XU, K_UU, U, X, 4)
    np.testing.assert_allclose(W.to_dense(), K_XU @ np.linalg.inv(K_UU), atol=1e-8)


def test_init_at_inducing_point_b1():
    U = InducingSet([[0.0], [1.0], [2.5]])
    spec = KernelSpec.rbf(1.0, 0.1)
    X = np.array([[1.0]])
    W = init_weights(kernel_matrix(spec, X, U.points), kernel_matrix(spec, U.points, U.points), U, X, 1)
    assert list(W.support[0]) == [1]
    np.testing.assert_allclose(W.values[0], [1.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_init_rows_match_restricted_lstsq(seed):
    X, U, spec, _, K_UU, K_XU = instance(5, 3, d=2, seed=seed)
    W = init_weights(K_XU, K_UU, U, X, 2)
    for i in range(5):
        J = W.support[i]
        d2 = np.sum((U.points - X[i]) ** 2, axis=1)
        assert set(J) == set(sorted(range(3), key=lambda j: (d2[j], j))[:2])
        w, *_ = np.linalg.lstsq(K_UU[J].T, K_XU[i], rcond=None)
        np.testing.assert_allclose(W.values[i], w, atol=1e-9)
        off = np.delete(W.to_dense()[i], J)
        assert np.all(off == 0.0)
        r0 = np.linalg.norm(W.values[i] @ K_UU[J] - K_XU[i])
        np.testing.assert_allclose(r0, np.linalg.norm(w @ K_UU[J] - K_XU[i]), rtol=1e-8)


def test_init_rejects_b_above_m():
    X, U, _, _, K_UU, K_XU = instance(4, 2)
    with pytest.raises(ContractError):
        init_weights(K_XU, K_UU, U, X, 3)


def test_objective_examples():
    X = np.linspace(-3, 3, 6)[:, None]
    spec = KernelSpec.rbf(1.0, 0.1)
    K = kernel_matrix(spec, X, X)
    ident = SparseWeights(np.arange(6)[:, None], np.ones((6, 1)), 6)
    assert objective(K, ident, K) <= 1e-12
    zero = SparseWeights(np.arange(6)[:, None], np.zeros((6, 1)), 6)
    np.testing.assert_allclose(objective(K, zero, K), np.linalg.norm(K), rtol=1e-15)


def test_objective_sparse_matches_dense():
    X, U, spec, K_XX, K_UU, K_XU = instance(6, 3, seed=2)
    W = init_weights(K_XU, K_UU, U, X, 2)
    Wd = W.to_dense()
    np.testing.assert_allclose(objective(K_XX, W, K_UU), np.linalg.norm(K_XX - Wd @ K_UU @ Wd.T), rtol=1e-9)


def fd_gradient(K_XX, W_dense, K_UU, h=1e-6):
    f = lambda Wd: objective(K_XX, full_support(Wd), K_UU) ** 2
    G = np.empty_like(W_dense)
    for i, j in itertools.product(*map(range, W_dense.shape)):
        P, M = W_dense.copy(), W_dense.copy()
        P[i, j] += h
        M[i, j] -= h
        G[i, j] = (f(P) - f(M)) / (2 * h)
    return G


@pytest.mark.parametrize("seed", range(10))
def test_analytic_gradient_matches_fd(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 9)), int(rng.integers(1, 5))
    X, U, spec, K_XX, K_UU, _ = instance(n, m, d=2, seed=seed)
    Wd = rng.normal(size=(n, m))
    G = gradient(K_XX, full_support(Wd), K_UU, "analytic")
    fd = fd_gradient(K_XX, Wd, K_UU)
    assert np.linalg.norm(G - fd) <= 1e-5 * np.linalg.norm(fd)


def test_paper_gradient_identity():
    X, U, spec, K_XX, K_UU, _ = instance(4, 2, seed=3)
    Wd = np.random.default_rng(3).normal(size=(4, 2))
    W = full_support(Wd)
    E = Wd @ K_UU @ Wd.T - K_XX
    WK = Wd @ K_UU
    analytic = gradient(K_XX, W, K_UU, "analytic")
    paper = gradient(K_XX, W, K_UU, "paper")
    # E is symmetric, so doubling its diagonal adds diag(E) W K_UU to E W K_UU
    np.testing.assert_allclose(paper, analytic / 4 + np.diag(np.diag(E)) @ WK, atol=1e-12)
    E2 = E.copy()
    E2[np.diag_indices(4)] *= 2
    np.testing.assert_allclose(paper, E2.T @ WK, atol=1e-12)


def test_gradient_zero_at_optimum():
    X = np.linspace(-3, 3, 7)[:, None]
    K = kernel_matrix(KernelSpec.rbf(1.0, 0.1), X, X)
    W = SparseWeights(np.arange(7)[:, None], np.ones((7, 1)), 7)
    np.testing.assert_allclose(project_rows(gradient(K, W, K), W), 0.0, atol=1e-9)


def test_project_rows():
    sup = np.array([[0, 2], [1, 3], [0, 1]])
    W = SparseWeights(sup, np.zeros((3, 2)), 4)
    G = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(project_rows(G, W), [[0.0, 2.0], [5.0, 7.0], [8.0, 9.0]])
    # support-only matrix is unchanged; projecting twice changes nothing
    on = W.with_values(project_rows(G, W)).to_dense()
    np.testing.assert_array_equal(W.with_values(project_rows(on, W)).to_dense(), on)
    one = SparseWeights(np.array([[2], [0], [3]]), np.zeros((3, 1)), 4)
    dense = one.with_values(project_rows(np.ones((3, 4)), one)).to_dense()
    np.testing.assert_array_equal(dense.sum(axis=1), 1.0)
    np.testing.assert_array_equal(np.argmax(dense, axis=1), [2, 0, 3])


def test_distill_exact_case_is_noop():
    X = np.linspace(-4, 4, 9)[:, None]
    y = np.sin(X[:, 0])
    t = teacher(X, y, KernelSpec.rbf(1.0, 0.1))
    model = distill(t, DistillConfig(b=9, m=9, iterations=20), inducing=InducingSet(X))
    assert model.trace[0].objective <= 1e-9
    assert model.trace[-1].objective <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(6, 30), st.integers(2, 6), st.integers(1, 3), st.integers(0, 10_000),
       st.sampled_from(["analytic", "paper"]))
def test_line_search_trace_monotone_and_supports_fixed(n, m, b, seed, mode):
    b = min(b, m)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    t = teacher(X, rng.normal(size=n), KernelSpec.rbf(1.2, 0.1))
    U = InducingSet(X[rng.choice(n, m, replace=False)])
    K_XX = kernel_matrix(t.spec, X, X)
    K_UU = kernel_matrix(t.spec, U.points, U.points)
    W0 = init_weights(kernel_matrix(t.spec, X, U.points), K_UU, U, X, b)
    W, trace = optimize_weights(K_XX, W0, K_UU, DistillConfig(b=b, m=m, iterations=15, gradient_mode=mode))
    obj = [r.objective for r in trace]
    assert all(b2 <= a for a, b2 in zip(obj, obj[1:]))
    np.testing.assert_array_equal(W.support, W0.support)
    assert W.b == b
    np.testing.assert_allclose(obj[-1], objective(K_XX, W, K_UU), rtol=1e-12)


def test_distill_is_deterministic():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 2))
    t = teacher(X, rng.normal(size=60), KernelSpec.rbf(1.0, 0.1))
    cfg = DistillConfig(b=4, m=12, iterations=10)
    a, b = distill(t, cfg, seed=5), distill(t, cfg, seed=5)
    assert distilled_to_bytes(a) == distilled_to_bytes(b)
    np.testing.assert_array_equal(a.W.values, b.W.values)


def test_fixed_step_follows_eta_and_blows_up():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 1))
    t = teacher(X, rng.normal(size=20), KernelSpec.rbf(1.0, 0.1))
    model = distill(t, DistillConfig(b=2, m=5, iterations=3, eta=1e-3, line_search=False))
    assert [r.step_size for r in model.trace[1:]] == [1e-3] * 3
    with pytest.raises(NumericalError, match="smaller step size"):
        distill(t, DistillConfig(b=2, m=5, iterations=50, eta=1e150, line_search=False))


def test_zero_iterations_is_init_only():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(15, 1))
    t = teacher(X, rng.normal(size=15), KernelSpec.rbf(1.0, 0.1))
    model = distill(t, DistillConfig(b=2, m=4, iterations=0))
    assert len(model.trace) == 1


@pytest.mark.parametrize("kwargs", [dict(b=0), dict(iterations=-1), dict(eta=0.0), dict(eta=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ContractError):
        DistillConfig(**kwargs)


def test_error_vs_sparsity():
    rng = np.random.default_rng(7)
    X = np.sort(rng.normal(0, 2, size=(50, 1)), axis=0)
    t = teacher(X, rng.normal(size=50), KernelSpec.rbf(1.0, 0.1))
    cfg = DistillConfig(m=8, iterations=10)
    curve = error_vs_sparsity(t, cfg, [1, 2, 2, 4, 8])
    errs = [e for _, e in curve]
    assert [b for b, _ in curve] == [1, 2, 2, 4, 8]
    assert errs[1] == errs[2]
    assert all(errs[-1] <= e + 1e-9 for e in errs)
    with pytest.raises(ContractError):
        error_vs_sparsity(t, cfg, [4, 2])
