import numpy as np
import pytest

from gpdistill.distill import DistillConfig, distill, init_weights
from gpdistill.errors import ContractError
from gpdistill.exact import Dataset, predict_exact, train_exact
from gpdistill.inference import (
    DistilledModel,
    SparseWeights,
    dense_test_row,
    precompute,
    predict_arrays,
    predict_batch,
    predict_point,
    solve_test_weights,
)
from gpdistill.kernels import KernelSpec, kernel_matrix
from gpdistill.spatial import InducingSet


def raw(X, y):
    return Dataset.from_arrays(X, y, standardize=False)


def build(n, m, b, d=2, seed=0, noise=0.1, y=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.normal(size=n) if y is None else y
    U = InducingSet(rng.normal(size=(m, d)))
    spec = KernelSpec.rbf(1.1, noise)
    K_UU = kernel_matrix(spec, U.points, U.points)
    W = init_weights(kernel_matrix(spec, X, U.points), K_UU, U, X, b)
    alpha, V = precompute(raw(X, y), W, K_UU, noise)
    return DistilledModel(U, spec, K_UU, alpha, V, b, W=W), X, y


def brute_row(model, x):
    """Dense test row: b nearest by (distance, id), b x b least squares."""
    d2 = np.sum((model.U.points - x) ** 2, axis=1)
    J = np.array(sorted(sorted(range(model.m), key=lambda j: (d2[j], j))[: model.b]))
    k = np.exp(-0.5 * np.sum(((model.U.points[J] - x) / model.spec.scale()) ** 2, axis=1))
    w, *_ = np.linalg.lstsq(model.K_UU[np.ix_(J, J)], k, rcond=None)
    row = np.zeros(model.m)
    row[J] = w
    return row


def test_precompute_dense_oracle():
    model, X, y = build(8, 4, 2, seed=1)
    Wd = model.W.to_dense()
    S = np.linalg.inv(Wd @ model.K_UU @ Wd.T + 0.1 * np.eye(8))
    np.testing.assert_allclose(model.alpha_tilde, model.K_UU @ Wd.T @ S @ y, atol=1e-10)
    np.testing.assert_allclose(model.V, model.K_UU @ Wd.T @ S @ Wd @ model.K_UU, atol=1e-10)


def test_v_symmetric_psd():
    model, _, _ = build(40, 10, 3, seed=2)
    np.testing.assert_array_equal(model.V, model.V.T)
    assert np.linalg.eigvalsh(model.V).min() >= -1e-8


def test_zero_targets():
    model, X, _ = build(10, 5, 2, seed=3, y=np.zeros(10))
    np.testing.assert_array_equal(model.alpha_tilde, 0.0)
    np.testing.assert_array_equal(predict_arrays(model, X)[0], 0.0)


def exact_reduction(noise):
    X = np.linspace(-5, 5, 11)[:, None]
    y = np.cos(X[:, 0])
    spec = KernelSpec.rbf(1.0, noise)
    t = train_exact(raw(X, y), spec, steps=0)
    return X, y, t, distill(t, DistillConfig(b=11, m=11, iterations=0), inducing=InducingSet(X))


def test_exact_reduction_alpha_and_training_means():
    X, y, t, model = exact_reduction(0.1)
    K = kernel_matrix(t.spec, X, X)
    np.testing.assert_allclose(model.alpha_tilde, K @ t.alpha, atol=1e-8)
    np.testing.assert_allclose(predict_arrays(model, X)[0], predict_exact(t, X)[0], atol=1e-8)


def test_exact_reduction_low_noise_interpolates():
    X, y, _, model = exact_reduction(1e-8)
    np.testing.assert_allclose(predict_arrays(model, X)[0], y, atol=1e-3)


def test_test_weights_at_inducing_point():
    model, _, _ = build(20, 6, 3, seed=4)
    for j in range(6):
        np.testing.assert_allclose(dense_test_row(model, model.U.points[j]), np.eye(6)[j], atol=1e-10)


@pytest.mark.parametrize("restrict", ["bxb", "bxm"])
def test_test_weights_full_support(restrict):
    model, _, _ = build(20, 5, 5, seed=5)
    x = np.array([0.3, -0.2])
    k = kernel_matrix(model.spec, x[None], model.U.points)[0]
    np.testing.assert_allclose(dense_test_row(model, x, restrict), k @ np.linalg.inv(model.K_UU), atol=1e-8)


def test_test_weights_restricted_oracles():
    model, _, _ = build(20, 8, 3, seed=6)
    rng = np.random.default_rng(6)
    for x in rng.normal(size=(10, 2)):
        np.testing.assert_allclose(dense_test_row(model, x), brute_row(model, x), atol=1e-9)
        nb, J, w = solve_test_weights(model, x, "bxm")
        k = kernel_matrix(model.spec, x[None], model.U.points)[0]
        w_o, *_ = np.linalg.lstsq(model.K_UU[J].T, k, rcond=None)
        np.testing.assert_allclose(w, w_o, atol=1e-9)
        # the b x m fit is the better fit to the full kernel row
        r_bxm = np.linalg.norm(w @ model.K_UU[J] - k)
        r_bxb = np.linalg.norm(dense_test_row(model, x)[J] @ model.K_UU[J] - k)
        assert r_bxm <= r_bxb + 1e-12
    with pytest.raises(ContractError):
        solve_test_weights(model, [0.0, 0.0], "full")


@pytest.mark.parametrize("seed", range(3))
def test_prediction_dense_substitution_oracle(seed):
    model, X, y = build(20, 6, 3, seed=seed)
    Wd = model.W.to_dense()
    S = np.linalg.inv(Wd @ model.K_UU @ Wd.T + 0.1 * np.eye(20))
    for x in np.random.default_rng(seed + 10).normal(size=(8, 2)):
        ws = brute_row(model, x)
        Kst = ws @ model.K_UU @ Wd.T
        res = predict_point(model, x)
        np.testing.assert_allclose(res.mean, Kst @ S @ y, atol=1e-9)
        raw_var = 1.0 - Kst @ S @ Kst
        np.testing.assert_allclose(res.variance, max(raw_var, 0.0), atol=1e-9)
        if abs(raw_var) > 1e-12:
            assert res.clamp_flag == (raw_var < 0)


def test_far_query():
    model, _, _ = build(20, 6, 3, seed=7)
    res = predict_point(model, [60.0, -60.0])
    assert abs(res.mean) <= 1e-12
    np.testing.assert_allclose(res.variance, 1.0, atol=1e-12)
    assert not res.clamp_flag


def test_clamp_flag():
    U = InducingSet([[0.0], [3.0]])
    spec = KernelSpec.rbf(1.0, 0.1)
    model = DistilledModel(U, spec, kernel_matrix(spec, U.points, U.points), np.zeros(2), 2 * np.eye(2), 1)
    res = predict_point(model, [0.0])
    assert res.clamp_flag and res.variance == 0.0
    assert list(res.support_used.indices) == [0]


def test_batch_stateless_and_permutation():
    model, _, _ = build(30, 8, 3, seed=8)
    Xs = np.random.default_rng(8).normal(size=(12, 2))
    full = predict_batch(model, Xs)
    halves = predict_batch(model, Xs[:6]) + predict_batch(model, Xs[6:])
    assert [(r.mean, r.variance) for r in full] == [(r.mean, r.variance) for r in halves]
    p = np.random.default_rng(9).permutation(12)
    perm = predict_batch(model, Xs[p])
    assert [(r.mean, r.variance) for r in perm] == [(full[i].mean, full[i].variance) for i in p]
    with pytest.raises(ContractError):
        predict_batch(model, np.zeros((2, 3)))


def test_sparse_weights_contract():
    with pytest.raises(ContractError):
        SparseWeights(np.array([[1, 0]]), np.zeros((1, 2)), 3)
    with pytest.raises(ContractError):
        SparseWeights(np.array([[0, 3]]), np.zeros((1, 2)), 3)
    with pytest.raises(ContractError):
        SparseWeights(np.array([[0, 1]]), np.zeros((1, 3)), 3)
    W = SparseWeights(np.array([[0, 2]]), np.array([[1.5, -2.0]]), 3)
    np.testing.assert_array_equal(W.to_dense(), [[1.5, 0.0, -2.0]])
    np.testing.assert_array_equal(W.to_csr().toarray(), W.to_dense())
    with pytest.raises(ValueError):
        W.support[0, 0] = 1
