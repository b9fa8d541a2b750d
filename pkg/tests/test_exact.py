import math

import numpy as np
import pytest

from gpdistill.errors import ContractError, NumericalError
from gpdistill.exact import Dataset, log_marginal_likelihood, predict_exact, train_exact
from gpdistill.kernels import KernelSpec


def dense_lml(X, y, spec):
    n = len(y)
    s = spec.scale()
    D = ((X[:, None, :] - X[None, :, :]) / s) ** 2
    K = np.exp(-0.5 * D.sum(-1)) + spec.noise_variance * np.eye(n)
    sign, logdet = np.linalg.slogdet(K)
    return -0.5 * y @ np.linalg.solve(K, y) - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)


def fd_grad(data, spec, h=1e-5):
    theta = spec.log_params()
    g = np.empty_like(theta)
    for k in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fp = log_marginal_likelihood(data, spec.with_log_params(tp), grad=False)[0]
        fm = log_marginal_likelihood(data, spec.with_log_params(tm), grad=False)[0]
        g[k] = (fp - fm) / (2 * h)
    return g


def raw(X, y):
    return Dataset.from_arrays(X, y, standardize=False)


def test_lml_single_point():
    spec = KernelSpec.rbf(0.7, 0.3)
    val, _ = log_marginal_likelihood(raw([[1.0]], [0.0]), spec)
    np.testing.assert_allclose(val, -0.5 * math.log(1.3) - 0.5 * math.log(2 * math.pi), rtol=1e-14)


def test_lml_matches_dense():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(7, 2)), rng.normal(size=7)
    spec = KernelSpec.ard([0.8, 1.7], 0.2)
    np.testing.assert_allclose(log_marginal_likelihood(raw(X, y), spec)[0], dense_lml(X, y, spec), rtol=1e-12)


def test_lml_gradient_two_points():
    data = raw([[0.0], [0.8]], [0.5, -1.0])
    spec = KernelSpec.rbf(1.0, 0.1)
    _, g = log_marginal_likelihood(data, spec)
    np.testing.assert_allclose(g, fd_grad(data, spec), rtol=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_lml_gradient_random(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 9)), int(rng.integers(1, 4))
    data = raw(rng.normal(size=(n, d)), rng.normal(size=n))
    if seed % 2:
        spec = KernelSpec.ard(rng.uniform(0.5, 2.0, d), rng.uniform(0.05, 0.5))
    else:
        spec = KernelSpec.rbf(rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.5))
    _, g = log_marginal_likelihood(data, spec)
    fd = fd_grad(data, spec)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_fit_term_decreases_with_noise():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(6, 1)), rng.normal(size=6)
    fits = []
    for noise in (0.1, 0.2):
        K = np.exp(-0.5 * (X - X.T) ** 2) + noise * np.eye(6)
        fits.append(y @ np.linalg.solve(K, y))
    assert fits[1] < fits[0]
    m1 = train_exact(raw(X, y), KernelSpec.rbf(1.0, 0.1), steps=0)
    m2 = train_exact(raw(X, y), KernelSpec.rbf(1.0, 0.2), steps=0)
    assert y @ m2.alpha < y @ m1.alpha


def test_train_zero_steps_keeps_init():
    spec = KernelSpec.rbf(1.3, 0.07)
    model = train_exact(raw(np.linspace(0, 1, 5)[:, None], np.arange(5.0)), spec, steps=0)
    assert model.spec == spec


def test_train_improves_toy_lml():
    rng = np.random.default_rng(2)
    x = rng.uniform(-10, 10, 150)
    y = np.sin(x) * np.exp(-x ** 2 / 50) + rng.normal(size=150)
    data = Dataset.from_arrays(x[:, None], y)
    init = KernelSpec.rbf(1.0, 0.5)
    model = train_exact(data, init, steps=60)
    assert model.lml > log_marginal_likelihood(data, init, grad=False)[0]
    assert model.lml >= max(model.history) - 1e-12


def test_train_recovers_lengthscale():
    rng = np.random.default_rng(3)
    n = 300
    X = rng.uniform(-10, 10, size=(n, 1))
    K = np.exp(-0.5 * (X - X.T) ** 2 / 4.0) + 1e-8 * np.eye(n)
    y = np.linalg.cholesky(K) @ rng.normal(size=n) + 0.1 * rng.normal(size=n)
    model = train_exact(raw(X, y), KernelSpec.rbf(1.0, 0.1), steps=200)
    assert 1.4 <= model.spec.lengthscales[0] <= 2.6


def test_train_guards():
    with pytest.raises(ContractError):
        train_exact(raw(np.zeros((3, 2)), np.ones(3)), KernelSpec.ard([1.0], 0.1), steps=1)


def test_model_factor_invariants():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(10, 2)), rng.normal(size=10)
    spec = KernelSpec.rbf(0.9, 0.05)
    model = train_exact(raw(X, y), spec, steps=0)
    K = np.exp(-0.5 * ((X[:, None] - X[None]) ** 2).sum(-1) / 0.81) + 0.05 * np.eye(10)
    assert np.linalg.norm(model.chol @ model.chol.T - K) <= 1e-8 * np.linalg.norm(K)
    assert np.linalg.norm(K @ model.alpha - y) <= 1e-8 * np.linalg.norm(y)


def test_predict_interpolates_at_low_noise():
    X = np.array([[0.0], [1.5], [3.0], [4.5]])
    y = np.array([0.3, -0.2, 1.0, 0.4])
    model = train_exact(raw(X, y), KernelSpec.rbf(1.0, 1e-8), steps=0)
    mean, var = predict_exact(model, X)
    np.testing.assert_allclose(mean, y, atol=1e-3)
    assert np.all(var <= 1e-6)


def test_predict_far_reverts_to_prior():
    rng = np.random.default_rng(5)
    model = train_exact(raw(rng.normal(size=(8, 1)), rng.normal(size=8)), KernelSpec.rbf(1.0, 0.1), steps=0)
    mean, var = predict_exact(model, [[100.0]])
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(var, 1.0, atol=1e-12)


def test_predict_matches_dense_formula():
    rng = np.random.default_rng(6)
    X, y, Xs = rng.normal(size=(3, 2)), rng.normal(size=3), rng.normal(size=(4, 2))
    spec = KernelSpec.ard([0.6, 1.1], 0.2)
    model = train_exact(raw(X, y), spec, steps=0)

    def k(A, B):
        return np.exp(-0.5 * (((A[:, None] - B[None]) / spec.scale()) ** 2).sum(-1))

    Kinv = np.linalg.inv(k(X, X) + 0.2 * np.eye(3))
    mean_o = k(Xs, X) @ Kinv @ y
    var_o = 1.0 - np.einsum("ij,jk,ik->i", k(Xs, X), Kinv, k(Xs, X))
    mean, var = predict_exact(model, Xs)
    np.testing.assert_allclose(mean, mean_o, atol=1e-10)
    np.testing.assert_allclose(var, var_o, atol=1e-10)


def test_predict_permutation_invariant_and_bounded():
    rng = np.random.default_rng(7)
    X, y, Xs = rng.normal(size=(12, 2)), rng.normal(size=12), rng.normal(size=(30, 2))
    spec = KernelSpec.rbf(0.8, 0.01)
    m1 = train_exact(raw(X, y), spec, steps=0)
    p = rng.permutation(12)
    m2 = train_exact(raw(X[p], y[p]), spec, steps=0)
    a, b = predict_exact(m1, Xs), predict_exact(m2, Xs)
    np.testing.assert_allclose(a[0], b[0], atol=1e-10)
    np.testing.assert_allclose(a[1], b[1], atol=1e-10)
    assert np.all(a[1] <= 1.0 + 1e-10)
    with pytest.raises(ContractError):
        predict_exact(m1, np.zeros((2, 3)))


def test_dataset_standardization():
    rng = np.random.default_rng(8)
    X = rng.normal(3.0, 2.0, size=(20, 2))
    y = rng.normal(5.0, 4.0, size=20)
    ds = Dataset.from_arrays(X, y)
    np.testing.assert_allclose(ds.y.mean(), 0.0, atol=1e-12)
    np.testing.assert_allclose(ds.y.std(), 1.0, atol=1e-12)
    np.testing.assert_allclose(ds.raw_y(), y, atol=1e-12)
    np.testing.assert_allclose(ds.raw_X(), X, atol=1e-12)


def test_dataset_constant_column_and_target():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.warns(UserWarning):
        ds = Dataset.from_arrays(X, np.arange(5.0))
    assert ds.feature_sds[0] == 1.0
    with pytest.raises(ContractError):
        Dataset.from_arrays(np.arange(5.0), np.ones(5))
    with pytest.raises(ContractError):
        Dataset.from_arrays([[0.0], [np.inf]], [1.0, 2.0])


def test_cholesky_failure_is_numerical():
    X = np.zeros((3, 1))
    data = raw(X, [1.0, 2.0, 3.0])
    bad = KernelSpec.rbf(1.0, 1e-300)
    with pytest.raises(NumericalError):
        log_marginal_likelihood(data, bad)
