import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abreformat.linear import (
    LinearConfig,
    LinearModel,
    fit,
    fit_linear,
    fit_logistic,
    objective,
    optimality_residual,
    predict_proba,
    predict_value,
    smooth_gradient,
)
from oracles import logistic_grid_1d, ridge_lstsq

CLS = dict(task="CLASSIFY")
REG = dict(task="REGRESS")


def test_separable_1d_matches_grid_oracle():
    X, y = np.array([[-1.0], [1.0]]), np.array([0.0, 1.0])
    cfg = LinearConfig(**CLS, penalty="L2", inverse_reg_C=10.0)
    m = fit_logistic(X, y, cfg)
    assert np.all((predict_proba(m, X) >= 0.5) == (y == 1))
    best, w_grid, b_grid = logistic_grid_1d(X[:, 0], y, 10.0, (0.0, 5.0), (-0.5, 0.5))
    assert objective(m.weights, X, y, cfg) <= best + 1e-12
    assert abs(m.coef[0] - w_grid) <= 1e-3 and abs(m.intercept - b_grid) <= 1e-3


def test_constant_labels_rejected():
    with pytest.raises(ValueError):
        fit_logistic(np.eye(3), np.ones(3))


def test_l1_tiny_c_zeroes_weights(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] + 0.3 * rng.normal(size=60) > 0).astype(float)
    m = fit_logistic(X, y, LinearConfig(**CLS, penalty="L1", inverse_reg_C=1e-6))
    assert np.all(np.abs(m.coef) <= 1e-3)
    assert m.intercept == pytest.approx(np.log(y.mean() / (1 - y.mean())), abs=1e-4)


def test_ridge_identity_example():
    m = fit_linear(np.eye(2), np.array([1.0, 2.0]),
                   LinearConfig(**REG, penalty="L2", inverse_reg_C=1.0, fit_intercept=False))
    np.testing.assert_allclose(m.coef, [0.5, 1.0], atol=1e-12)
    assert m.intercept == 0.0


def test_unpenalized_interpolates(rng):
    X = rng.normal(size=(4, 3))
    y = rng.normal(size=4)
    m = fit_linear(X, y, LinearConfig(**REG, penalty="NONE"))
    assert np.max(np.abs(predict_value(m, X) - y)) <= 1e-9


@pytest.mark.parametrize("penalty", ["L1", "L2", "NONE"])
def test_zero_targets_give_zero_weights(rng, penalty):
    m = fit_linear(rng.normal(size=(8, 3)), np.zeros(8), LinearConfig(**REG, penalty=penalty))
    np.testing.assert_allclose(m.weights, 0.0, atol=1e-9)


def test_prediction_examples(rng):
    X = rng.normal(size=(5, 3))
    zero = LinearModel(np.zeros(4), LinearConfig(), True, 0.0)
    assert np.all(predict_proba(zero, X) == 0.5)
    const = LinearModel(np.r_[np.zeros(3), 2.5], LinearConfig(**REG), True, 0.0)
    assert np.all(predict_value(const, X) == 2.5)
    m = LinearModel(np.array([1.0, -2.0, 0.5, 0.1]), LinearConfig(), True, 0.0)
    order = np.argsort(predict_value(m, X))
    assert np.all(np.diff(predict_proba(m, X)[order]) >= 0)


def test_logistic_l2_gradient_small_and_fd(rng):
    X = rng.normal(size=(80, 6))
    y = (X @ rng.normal(size=6) + rng.normal(size=80) > 0).astype(float)
    cfg = LinearConfig(**CLS, penalty="L2", inverse_reg_C=1.0)
    m = fit_logistic(X, y, cfg)
    assert m.converged and m.final_grad_norm <= 1e-6
    # analytic gradient against central differences at a generic point
    theta = rng.normal(size=7)
    g = smooth_gradient(theta, X, y, cfg)
    h = 1e-5
    fd = np.array([(objective(theta + h * e, X, y, cfg) - objective(theta - h * e, X, y, cfg)) / (2 * h)
                   for e in np.eye(7)])
    assert np.max(np.abs(g - fd) / np.maximum(np.abs(g) + np.abs(fd), 1e-8)) <= 1e-6


def test_wide_problem_converges(rng):
    X = rng.normal(size=(40, 300))
    y = (X[:, :3].sum(axis=1) > 0).astype(float)
    cfg = LinearConfig(**CLS, penalty="L2", inverse_reg_C=10.0)
    m = fit_logistic(X, y, cfg)
    assert optimality_residual(m.weights, X, y, cfg) <= 1e-6


def test_model_roundtrip(tmp_path, rng):
    X = rng.normal(size=(30, 4))
    m = fit(X, X[:, 0] * 2.0, LinearConfig(**REG, inverse_reg_C=0.01))
    m.save(tmp_path / "m.json")
    back = LinearModel.load(tmp_path / "m.json")
    assert np.array_equal(back.weights, m.weights) and back.config == m.config


def test_shape_mismatch(rng):
    m = LinearModel(np.zeros(4), LinearConfig(), True, 0.0)
    with pytest.raises(ValueError):
        predict_proba(m, rng.normal(size=(2, 5)))


def test_bad_config():
    with pytest.raises(ValueError):
        LinearConfig(inverse_reg_C=0.0)


# -- properties -------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 10), st.integers(1, 10), st.sampled_from([0.01, 0.1, 1.0, 10.0]),
       st.integers(0, 2**32 - 1))
def test_ridge_matches_closed_form(n, d, C, seed):
    r = np.random.default_rng(seed)
    X, y = r.normal(size=(n, d)), r.normal(size=n)
    m = fit_linear(X, y, LinearConfig(**REG, penalty="L2", inverse_reg_C=C))
    np.testing.assert_allclose(m.weights, ridge_lstsq(X, y, C), rtol=0, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 30), st.integers(1, 8), st.sampled_from(["L1", "L2"]),
       st.sampled_from([0.01, 1.0, 10.0]), st.integers(0, 2**32 - 1))
def test_descent_property(n, d, penalty, C, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, d))
    y = np.r_[0.0, 1.0, r.integers(0, 2, size=n - 2)]
    cfg = LinearConfig(**CLS, penalty=penalty, inverse_reg_C=C)
    m = fit_logistic(X, y, cfg)
    assert objective(m.weights, X, y, cfg) <= objective(np.zeros(d + 1), X, y, cfg) + 1e-12
