import math

import numpy as np
import pytest

from netel.estfuns import (EstimatingFunctionError, by_name, compound_symmetry, linear_ef,
                           logistic_ef, mean_ef, quantile_ef, repeated_ef, sigmoid)
from netel.harness.data import ExperimentSpec, estimating_function, generate_data, true_theta


def test_quantile_values():
    ef = quantile_ef(0.05)
    assert ef(np.array([[10.0]]), [20.0])[0, 0] == -1.0
    assert ef(np.array([[30.0]]), [20.0])[0, 0] == pytest.approx(0.05 / 0.95)
    assert ef(np.array([[20.0]]), [20.0])[0, 0] == -1.0  # psi(0) = -1


def test_quantile_unbiased_identity():
    tau = 0.05
    assert -tau + (tau / (1 - tau)) * (1 - tau) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
def test_quantile_tau_range(tau):
    with pytest.raises(EstimatingFunctionError):
        quantile_ef(tau)


def test_linear_examples():
    ef = linear_ef(2)
    np.testing.assert_array_equal(ef(np.array([[2.0, 1.0, 0.0]]), [2.0, 5.0]), [[0.0, 0.0]])
    np.testing.assert_array_equal(ef(np.array([[0.0, 1.0, 1.0]]), [1.0, 1.0]), [[-2.0, -2.0]])


def test_linear_noiseless_paper_beta():
    beta = np.array([2, 0.5, 4, math.sqrt(6), -3])
    X = np.random.default_rng(0).standard_normal((50, 5))
    Z = np.column_stack([X @ beta, X])
    np.testing.assert_allclose(linear_ef(5)(Z, beta), 0.0, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(EstimatingFunctionError, match="columns"):
        linear_ef(3)(np.zeros((4, 3)), np.zeros(3))
    with pytest.raises(EstimatingFunctionError, match="theta"):
        mean_ef(3)(np.zeros((4, 3)), np.zeros(2))
    with pytest.raises(EstimatingFunctionError, match="finite"):
        mean_ef(1)(np.zeros((4, 1)), [np.nan])


def test_logistic_examples():
    ef = logistic_ef(2)
    out = ef(np.array([[1.0, 3.0, -2.0]]), [0.0, 0.0])
    np.testing.assert_allclose(out, [[1.5, -1.0]])
    sat = ef(np.array([[1.0, 1.0, 0.0]]), [800.0, 0.0])
    np.testing.assert_allclose(sat, 0.0, atol=1e-300)
    with pytest.raises(EstimatingFunctionError, match="0 or 1"):
        ef(np.array([[0.5, 1.0, 0.0]]), [0.0, 0.0])


def test_sigmoid_no_overflow():
    with np.errstate(over="raise"):
        v = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_array_equal(v, [0.0, 0.5, 1.0])


def test_logistic_unbiased_clt():
    spec = ExperimentSpec(family="logistic", d=5, K=1, n=100_000, seed=3)
    (Z,) = generate_data(spec)
    g = logistic_ef(5)(Z, true_theta(spec))
    assert np.linalg.norm(g.mean(axis=0)) < 4 * math.sqrt(5 / 1e5)


def test_mean_examples():
    ef = mean_ef(2)
    np.testing.assert_array_equal(ef(np.array([[3.0, 4.0]]), [3.0, 4.0]), [[0.0, 0.0]])
    np.testing.assert_array_equal(ef(np.array([[1.0, 2.0]]), [0.0, 0.0]), [[1.0, 2.0]])
    X = np.random.default_rng(1).standard_normal((30, 2))
    np.testing.assert_allclose(ef.estimate(X), X.mean(axis=0))


def _repeated_loop(Z, beta, M):
    Y, X = Z[:, :3], Z[:, 3:].reshape(-1, 3, 2)
    out = np.zeros((len(Z), 2))
    for i in range(len(Z)):
        e = Y[i] - X[i] @ beta
        out[i] = X[i].T @ M @ e
    return out


def test_repeated_matches_explicit_loop():
    ef = repeated_ef()
    assert (ef.d, ef.p, ef.r) == (9, 2, 4)
    Z = np.random.default_rng(2).standard_normal((25, 9))
    beta = np.array([0.3, -1.2])
    g = ef(Z, beta)
    np.testing.assert_allclose(g[:, :2], _repeated_loop(Z, beta, np.eye(3)), rtol=1e-12)
    np.testing.assert_allclose(g[:, 2:], _repeated_loop(Z, beta, compound_symmetry(3)), rtol=1e-12)


def test_repeated_first_block_is_stacked_linear_score():
    Z = np.random.default_rng(5).standard_normal((10, 9))
    beta = np.array([1.0, 5.0])
    Y, X = Z[:, :3], Z[:, 3:].reshape(-1, 3, 2)
    score = sum(X[:, t] * (Y[:, t] - X[:, t] @ beta)[:, None] for t in range(3))
    np.testing.assert_allclose(repeated_ef()(Z, beta)[:, :2], score, rtol=1e-12)


def test_repeated_noiseless_zero():
    X = np.random.default_rng(6).standard_normal((10, 3, 2))
    beta = np.array([1.0, 5.0])
    Z = np.column_stack([X @ beta, X.reshape(10, 6)])
    np.testing.assert_allclose(repeated_ef()(Z, beta), 0.0, atol=1e-12)


def test_compound_symmetry():
    np.testing.assert_array_equal(compound_symmetry(3), [[1, .5, .5], [.5, 1, .5], [.5, .5, 1]])


def test_by_name():
    assert by_name("linear", d=4).p == 4
    assert by_name("mean").d == 3
    assert by_name("quantile", tau=0.1)(np.array([[1.0]]), [0.0])[0, 0] == pytest.approx(1 / 9)
    with pytest.raises(EstimatingFunctionError, match="unknown family"):
        by_name("poisson")


@pytest.mark.parametrize("family,d", [("linear", 3), ("logistic", 3), ("mean", 3),
                                      ("repeated", 2), ("quantile", 1)])
def test_estimate_is_root(family, d):
    spec = ExperimentSpec(family=family, d=d, K=1, n=4000, seed=8)
    ef = estimating_function(spec)
    (Z,) = generate_data(spec)
    th = ef.estimate(Z)
    if family == "quantile":
        # step function: the sample quantile balances the two sides to O(1/n)
        assert abs(ef(Z, th).mean()) < 2.0 / len(Z) / 0.95
    elif family == "repeated":
        # r > p: least-squares root; check it is close to the truth instead
        np.testing.assert_allclose(th, true_theta(spec), atol=0.05)
    else:
        np.testing.assert_allclose(ef(Z, th).mean(axis=0), 0.0, atol=1e-9)


@pytest.mark.parametrize("family,d", [("linear", 5), ("logistic", 5), ("mean", 3),
                                      ("repeated", 2)])
def test_finite_difference_jacobian_consistency(family, d):
    # central differences at two step sizes agree: the mean map is smooth in theta
    spec = ExperimentSpec(family=family, d=d, K=1, n=500, seed=2)
    ef = estimating_function(spec)
    (Z,) = generate_data(spec)
    th = true_theta(spec) + 0.1
    def jac(h):
        cols = []
        for k in range(ef.p):
            e = np.zeros(ef.p)
            e[k] = h * (1 + abs(th[k]))
            cols.append((ef(Z, th + e).mean(0) - ef(Z, th - e).mean(0)) / (2 * e[k]))
        return np.column_stack(cols)
    J1, J2 = jac(1e-6), jac(1e-4)
    np.testing.assert_allclose(J1, J2, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("family,d", [("quantile", 1), ("linear", 5), ("logistic", 5),
                                      ("mean", 3), ("repeated", 2)])
def test_unbiased_at_truth(family, d):
    spec = ExperimentSpec(family=family, d=d, K=1, n=20_000, seed=11)
    ef = estimating_function(spec)
    (Z,) = generate_data(spec)
    g = ef(Z, true_theta(spec))
    se = g.std(axis=0, ddof=1) / math.sqrt(len(g))
    assert np.all(np.abs(g.mean(axis=0)) <= 3 * se + 1e-12)
