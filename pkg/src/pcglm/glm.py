"""Binomial GLM with logit link, fitted by iteratively reweighted least squares."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidFitError, SeparationError, ShapeError, SingularMatrixError
from .numeric import cholesky_solve, spd_inverse

MAX_ITER = 100
MAX_HALVINGS = 10
DEVIANCE_RTOL = 1e-10
SCORE_TOL = 1e-8
SEPARATION_BOUND = 15.0


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray  # intercept first
    covariance: np.ndarray
    deviance: float
    iterations: int
    converged: bool
    null_deviance: float = float("nan")
    ridge: float = 0.0
    linear_predictor: np.ndarray = None

    @property
    def n_regressors(self):
        return len(self.coefficients) - 1


@dataclass(frozen=True)
class WaldSummary:
    estimate: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p_value: np.ndarray


def expit(eta):
    """Inverse logit without overflow for large |eta|."""
    eta = np.asarray(eta, dtype=np.float64)
    e = np.exp(-np.abs(eta))
    return np.where(eta >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def two_sided_p(z):
    # erfc keeps precision in the far tail where 1 - cdf would cancel
    return math.erfc(abs(z) / math.sqrt(2.0))


def binomial_deviance(y, mu):
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(y > 0, y * np.log(np.where(y > 0, y / mu, 1.0)), 0.0)
        t0 = np.where(y < 1, (1 - y) * np.log(np.where(y < 1, (1 - y) / (1 - mu), 1.0)), 0.0)
    return float(2.0 * np.sum(t1 + t0))


def log_likelihood(coefficients, Z, y):
    """Bernoulli log-likelihood at ``coefficients`` (intercept first)."""
    eta = _design(np.asarray(Z, dtype=np.float64)) @ np.asarray(coefficients, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    # log(1 + e^eta) computed without overflow
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(coefficients, Z, y):
    """Gradient of :func:`log_likelihood`."""
    X = _design(np.asarray(Z, dtype=np.float64))
    return X.T @ (np.asarray(y, dtype=np.float64) - expit(X @ np.asarray(coefficients, dtype=np.float64)))


def _design(Z):
    return np.hstack([np.ones((Z.shape[0], 1)), Z])


def fit_binomial_logit(Z, y, ridge=0.0):
    """Maximum-likelihood logistic regression by IRLS.

    Args:
        Z: n x m regressor matrix (no intercept column; one is added).
        y: length-n array of 0/1 labels.
        ridge: optional L2 penalty on the slopes (intercept unpenalised).

    Returns:
        GlmFit with the inverse (penalised) Fisher information as covariance.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if Z.shape[0] != len(y):
        raise ShapeError("regressor rows do not match label count", rows=Z.shape[0], labels=len(y))
    if not np.all((y == 0) | (y == 1)):
        raise ShapeError("labels must be 0/1")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if len(y) == 0:
        raise ShapeError("no observations")
    ybar = float(y.mean())
    if ybar in (0.0, 1.0):
        raise SeparationError(
            "all labels belong to one class; the model is not identifiable",
            label=int(ybar),
            advice="supply data containing both classes",
        )
    X = _design(Z)
    n, m1 = X.shape
    penalty = np.full(m1, float(ridge))
    penalty[0] = 0.0

    def objective(beta):
        eta = X @ beta
        mu = expit(eta)
        return binomial_deviance(y, mu) + ridge * float(beta[1:] @ beta[1:]), eta, mu

    beta = np.zeros(m1)
    beta[0] = math.log(ybar / (1.0 - ybar))
    null_dev = binomial_deviance(y, np.full(n, ybar))
    dev, eta, mu = objective(beta)
    converged = False
    it = 0
    while it < MAX_ITER:
        it += 1
        w = mu * (1.0 - mu)
        grad = X.T @ (y - mu) - penalty * beta
        if float(np.max(np.abs(grad))) < SCORE_TOL:
            converged = True
            break
        info = (X * w[:, None]).T @ X + np.diag(penalty)
        try:
            step = cholesky_solve(info, grad)
        except SingularMatrixError as exc:
            if float(np.max(np.abs(beta))) > SEPARATION_BOUND:
                raise _separation(beta, it) from exc
            raise SingularMatrixError(
                "weighted least-squares system is singular", pivot=exc.pivot, iteration=it
            ) from exc
        new_beta = beta + step
        new_dev, new_eta, new_mu = objective(new_beta)
        halvings = 0
        while not new_dev <= dev and halvings < MAX_HALVINGS:
            step = step / 2.0
            new_beta = beta + step
            new_dev, new_eta, new_mu = objective(new_beta)
            halvings += 1
        rel = abs(dev - new_dev) / (abs(new_dev) + 0.1)
        beta, dev, eta, mu = new_beta, new_dev, new_eta, new_mu
        if rel < DEVIANCE_RTOL:
            converged = True
            break

    w = mu * (1.0 - mu)
    saturated = bool(np.min(w) < 1e-10)
    if float(np.max(np.abs(beta))) > SEPARATION_BOUND and (not converged or saturated):
        raise _separation(beta, it)
    if not converged:
        raise ConvergenceError("IRLS did not converge", iterations=it)
    info = (X * w[:, None]).T @ X + np.diag(penalty)
    cov = spd_inverse(info)
    return GlmFit(
        coefficients=beta,
        covariance=cov,
        deviance=binomial_deviance(y, mu),
        iterations=it,
        converged=converged,
        null_deviance=null_dev,
        ridge=float(ridge),
        linear_predictor=eta,
    )


def _separation(beta, it):
    return SeparationError(
        "complete or quasi-complete separation detected",
        max_abs_coefficient=float(np.max(np.abs(beta))),
        iterations=it,
        advice="refit with ridge > 0",
    )


def predict_linear(fit, Z):
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[1] != fit.n_regressors:
        raise ShapeError(
            f"expected {fit.n_regressors} regressors, got {Z.shape[1]}",
            expected=fit.n_regressors,
            got=int(Z.shape[1]),
        )
    return fit.coefficients[0] + Z @ fit.coefficients[1:]


def predict_proba(fit, Z):
    return expit(predict_linear(fit, Z))


def wald_summary(fit):
    if not fit.converged:
        raise InvalidFitError("Wald summary requires a converged fit")
    est = np.asarray(fit.coefficients, dtype=np.float64)
    se = np.sqrt(np.diag(fit.covariance))
    z = np.divide(est, se, out=np.zeros_like(est), where=se > 0)
    p = np.array([two_sided_p(v) for v in z])
    return WaldSummary(estimate=est, se=se, z=z, p_value=p)
