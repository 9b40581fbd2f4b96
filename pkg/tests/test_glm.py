import math

import mpmath
import numpy as np
import pytest

from pcglm.errors import InvalidFitError, SeparationError, ShapeError
from pcglm.glm import (
    GlmFit,
    fit_binomial_logit,
    log_likelihood,
    predict_linear,
    predict_proba,
    score,
    wald_summary,
)


def newton_oracle(x, y, iters=100):
    """Plain-Python Newton-Raphson over (a, b) for P(y=1) = 1/(1+exp(-(a+bx)))."""
    a = b = 0.0
    for _ in range(iters):
        ga = gb = haa = hab = hbb = 0.0
        for xi, yi in zip(x, y):
            p = 1.0 / (1.0 + math.exp(-(a + b * xi)))
            ga += yi - p
            gb += (yi - p) * xi
            w = p * (1 - p)
            haa += w
            hab += w * xi
            hbb += w * xi * xi
        det = haa * hbb - hab * hab
        da = (hbb * ga - hab * gb) / det
        db = (haa * gb - hab * ga) / det
        a += da
        b += db
        if abs(da) + abs(db) < 1e-15:
            break
    return a, b


def random_logit_data(seed, n=60, m=3):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, m))
    beta = rng.normal(scale=0.7, size=m + 1)
    p = 1 / (1 + np.exp(-(beta[0] + Z @ beta[1:])))
    y = (rng.uniform(size=n) < p).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return Z, y


def test_intercept_only_quarter():
    y = np.array([1, 0, 0, 0] * 5, dtype=float)
    fit = fit_binomial_logit(np.zeros((20, 0)), y)
    assert abs(fit.coefficients[0] - math.log(0.25 / 0.75)) < 1e-8


def test_intercept_only_balanced():
    fit = fit_binomial_logit(np.zeros((10, 0)), np.array([0, 1] * 5, dtype=float))
    assert abs(fit.coefficients[0]) < 1e-12


def test_matches_newton_oracle():
    rng = np.random.default_rng(2024)
    x = rng.standard_normal(40)
    y = (rng.uniform(size=40) < 1 / (1 + np.exp(-(0.3 + 1.1 * x)))).astype(float)
    a, b = newton_oracle(x.tolist(), y.tolist())
    fit = fit_binomial_logit(x.reshape(-1, 1), y)
    np.testing.assert_allclose(fit.coefficients, [a, b], atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_score_equations_and_covariance(seed):
    Z, y = random_logit_data(seed)
    fit = fit_binomial_logit(Z, y)
    assert np.max(np.abs(score(fit.coefficients, Z, y))) < 1e-6
    X = np.column_stack([np.ones(len(y)), Z])
    mu = 1 / (1 + np.exp(-X @ fit.coefficients))
    info = X.T @ (X * (mu * (1 - mu))[:, None])
    np.testing.assert_allclose(fit.covariance, np.linalg.inv(info), rtol=1e-6)
    assert fit.deviance <= fit.null_deviance + 1e-12
    w = np.linalg.eigvalsh(fit.covariance)
    assert w.min() > -1e-8


@pytest.mark.parametrize("seed", range(5))
def test_score_matches_finite_differences(seed):
    Z, y = random_logit_data(seed, n=30, m=2)
    beta = np.random.default_rng(seed + 100).normal(size=3)
    g = score(beta, Z, y)
    h = 1e-5
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (log_likelihood(beta + e, Z, y) - log_likelihood(beta - e, Z, y)) / (2 * h)
        assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(g[i]))


def test_linear_predictor_matches_fit(rng):
    Z, y = random_logit_data(3)
    fit = fit_binomial_logit(Z, y)
    np.testing.assert_allclose(predict_linear(fit, Z), fit.linear_predictor, atol=1e-12)


def _fixed(coef, cov=None):
    coef = np.asarray(coef, dtype=float)
    cov = np.eye(len(coef)) if cov is None else np.asarray(cov, dtype=float)
    return GlmFit(coefficients=coef, covariance=cov, deviance=0.0, iterations=1, converged=True)


def test_predict_linear_examples():
    np.testing.assert_array_equal(predict_linear(_fixed([0, 0]), np.ones((3, 1))), 0)
    assert predict_linear(_fixed([1, 2]), [3.0])[0] == 7
    with pytest.raises(ShapeError):
        predict_linear(_fixed([1, 2]), np.ones((2, 2)))


def test_predict_proba_examples():
    assert predict_proba(_fixed([0.0]), np.zeros((1, 0)))[0] == 0.5
    assert abs(predict_proba(_fixed([math.log(3)]), np.zeros((1, 0)))[0] - 0.75) < 1e-15
    hi = predict_proba(_fixed([40.0]), np.zeros((1, 0)))[0]
    lo = predict_proba(_fixed([-40.0]), np.zeros((1, 0)))[0]
    assert abs(1 - hi) < 1e-15 and 0 < lo < 1e-15
    with np.errstate(over="raise"):
        predict_proba(_fixed([-800.0]), np.zeros((1, 0)))


def test_wald_p_values():
    z3 = float(mpmath.erfc(3 / mpmath.sqrt(2)))  # 2(1 - Phi(3))
    s = wald_summary(_fixed([1.959964 * 0.4, 0.0, 3 * 0.2], np.diag([0.16, 1.0, 0.04])))
    assert abs(s.p_value[0] - 0.05) < 1e-6
    assert s.p_value[1] == 1.0
    assert abs(s.p_value[2] - z3) < 1e-6
    assert abs(s.p_value[2] - 0.0026997960632601) < 1e-12


def test_wald_requires_convergence():
    fit = GlmFit(np.zeros(2), np.eye(2), 0.0, 100, False)
    with pytest.raises(InvalidFitError):
        wald_summary(fit)


def test_complete_separation():
    x = np.array([-3, -2, -1, -0.5, 0.5, 1, 2, 3.0])
    y = (x > 0).astype(float)
    with pytest.raises(SeparationError) as err:
        fit_binomial_logit(x.reshape(-1, 1), y)
    assert "ridge" in err.value.context["advice"]
    fit = fit_binomial_logit(x.reshape(-1, 1), y, ridge=0.5)
    assert fit.converged and fit.coefficients[1] > 0


def test_single_class_labels():
    with pytest.raises(SeparationError):
        fit_binomial_logit(np.ones((5, 1)), np.ones(5))


def test_non_binary_labels():
    with pytest.raises(ShapeError):
        fit_binomial_logit(np.ones((3, 1)), [0, 1, 2])
