"""Binary GP classification with the logistic link via Laplace approximation.

Mode finding uses damped Newton in the standard stabilized form
B = I + W^(1/2) K W^(1/2), so no explicit inverse of the kernel matrix is
formed. The literal textbook formulas (explicit K^-1) are also available for
small-instance cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .errors import ConfigurationError, NumericError
from .kernel import GramMatrices

SAMPLING_JITTER = 1e-8


def link(eta):
    """Logistic function 1 / (1 + exp(-eta)), overflow-safe."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def log_lik_terms(eta, y):
    """Bernoulli-logistic log likelihood, gradient and positive curvature.

    value = sum_i y_i eta_i - log(1 + exp(eta_i)); gradient = y - psi(eta);
    curvature = psi(eta) (1 - psi(eta)), returned as magnitudes in (0, 0.25].
    """
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = np.asarray(link(eta))
    value = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    gradient = y - psi
    hessian_diag = psi * (1.0 - psi)
    return value, gradient, hessian_diag


@dataclass(frozen=True)
class ModeResult:
    """Posterior mode of the latent vector and cached factors."""

    eta_hat: np.ndarray
    nabla: np.ndarray            # diagonal curvature W at the mode
    gradient: np.ndarray         # d log p(y|eta) at the mode; equals K^-1 eta_hat
    sqrt_w: np.ndarray
    chol_b: np.ndarray           # lower Cholesky of I + W^1/2 K W^1/2
    log_ml: float
    converged: bool
    iterations: int
    stationarity: float


def newton_mode(K: np.ndarray, y: np.ndarray, tol: float = 1e-6,
                max_iter: int = 100) -> ModeResult:
    """Damped Newton ascent for the latent posterior mode given kernel K."""
    n = y.size
    eta = np.zeros(n)
    a = np.zeros(n)  # tracks K^-1 eta along the iteration
    value, grad, w = log_lik_terms(eta, y)
    objective = value  # - 0.5 a.eta = 0 at start
    converged = False
    it = 0
    L = None
    for it in range(1, max_iter + 1):
        sw = np.sqrt(w)
        B = np.eye(n) + sw[:, None] * K * sw[None, :]
        L = cholesky(B, lower=True)
        b = w * eta + grad
        v = solve_triangular(L, sw * (K @ b), lower=True)
        a_new = b - sw * solve_triangular(L.T, v, lower=False)
        # step-halving on psi(eta) = loglik(eta) - 0.5 eta' K^-1 eta
        step = 1.0
        while True:
            a_try = a + step * (a_new - a)
            eta_try = K @ a_try
            val_try, grad_try, w_try = log_lik_terms(eta_try, y)
            obj_try = val_try - 0.5 * a_try @ eta_try
            if obj_try >= objective or step < 1e-8:
                break
            step *= 0.5
        a, eta = a_try, eta_try
        value, grad, w = val_try, grad_try, w_try
        objective = obj_try
        stationarity = float(np.max(np.abs(grad - a)))
        if stationarity <= tol:
            converged = True
            break
    stationarity = float(np.max(np.abs(grad - a)))
    sw = np.sqrt(w)
    L = cholesky(np.eye(n) + sw[:, None] * K * sw[None, :], lower=True)
    log_ml = value - 0.5 * a @ eta - float(np.sum(np.log(np.diag(L))))
    return ModeResult(eta, w, grad, sw, L, float(log_ml), converged, it,
                      stationarity)


@dataclass(frozen=True)
class LaplaceFit:
    """Converged (or flagged) Laplace fit of the GP classifier."""

    eta_hat: np.ndarray
    nabla: np.ndarray
    gram: GramMatrices
    log_ml: float
    converged: bool
    iterations: int
    mode: ModeResult = field(repr=False)
    y: np.ndarray = field(repr=False)


def fit_laplace(gram: GramMatrices, y, tol: float = 1e-6,
                max_iter: int = 100) -> LaplaceFit:
    """Find the latent posterior mode for binary outcomes y under `gram`."""
    y = np.asarray(y, dtype=float)
    mode = newton_mode(gram.K_train, y, tol=tol, max_iter=max_iter)
    return LaplaceFit(mode.eta_hat, mode.nabla, gram, mode.log_ml,
                      mode.converged, mode.iterations, mode, y)


@dataclass(frozen=True)
class PredictiveGaussian:
    """Gaussian approximation of the latent function at evaluation points."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size


def predict(fit: LaplaceFit, require_converged: bool = False) -> PredictiveGaussian:
    """Predictive mean and covariance at the Gram's evaluation points.

    mean = K_cross K_train^-1 eta_hat, computed through the gradient identity
    at the mode; cov = K_eval - K_cross (K_train + W^-1)^-1 K_cross'.
    """
    if require_converged and not fit.converged:
        raise NumericError("Laplace fit did not converge")
    g = fit.gram
    mode = fit.mode
    mean = g.K_cross @ mode.gradient
    v = solve_triangular(mode.chol_b, mode.sqrt_w[:, None] * g.K_cross.T,
                         lower=True)
    cov = g.K_eval - v.T @ v
    cov = 0.5 * (cov + cov.T)
    try:
        chol = cholesky(cov + SAMPLING_JITTER * np.eye(cov.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError("predictive covariance is not factorizable") from exc
    return PredictiveGaussian(mean, cov, chol)


def predict_literal(fit: LaplaceFit) -> PredictiveGaussian:
    """Textbook formulas with explicit inverses; small-n cross-check path."""
    g = fit.gram
    mean = g.K_cross @ cho_solve(cho_factor(g.K_train, lower=True), fit.eta_hat)
    middle = np.linalg.inv(g.K_train + np.diag(1.0 / fit.nabla))
    cov = g.K_eval - g.K_cross @ middle @ g.K_cross.T
    cov = 0.5 * (cov + cov.T)
    chol = cholesky(cov + SAMPLING_JITTER * np.eye(cov.shape[0]), lower=True)
    return PredictiveGaussian(mean, cov, chol)


def sample_functions(pred: PredictiveGaussian, B: int, rng) -> np.ndarray:
    """Draw B rows from N(mean, cov) using the cached factor."""
    if B < 1:
        raise ConfigurationError(f"number of draws must be >= 1, got {B}")
    z = rng.standard_normal((B, pred.dim))
    return pred.mean[None, :] + z @ pred.chol.T
