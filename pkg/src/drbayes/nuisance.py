"""Pilot estimators and Riesz representers.

Fits the propensity score and the uncorrected-GP outcome pilot, exposes the
representer gamma-hat for each supported functional, and implements the
sigma_n tuning rule that scales the prior correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import gp_laplace, kernel
from .data_model import Dataset
from .errors import ConfigurationError, DegenerateSampleError, ValidationError

PROPENSITY_CLIP = 1e-4
SEPARATION_NORM_BOUND = 30.0
KDE_FLOOR = 1e-3

ATE, APE, AD, MAR = "ATE", "APE", "AD", "MAR"


@dataclass(frozen=True)
class PropensityModel:
    """Fitted propensity score; evaluations lie strictly in (0, 1)."""

    kind: str
    parameters: object
    evaluate: Callable[[np.ndarray], np.ndarray]
    separation_flag: bool = False
    log_lik: float = float("nan")

    def to_json_dict(self) -> dict:
        params = self.parameters
        if isinstance(params, np.ndarray):
            params = [float(v) for v in params]
        elif not isinstance(params, (list, float, int, type(None))):
            params = repr(params)
        return {"kind": self.kind, "parameters": params,
                "separation_flag": self.separation_flag}


@dataclass(frozen=True)
class OutcomeModel:
    """Pilot conditional mean: logistic link of an uncorrected GP mean."""

    eta_mean: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    spec: kernel.KernelSpec = None
    log_ml: float = float("nan")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """m-hat at stacked (d, x) row points."""
        return gp_laplace.link(self.eta_mean(np.atleast_2d(points)))


@dataclass(frozen=True)
class RieszRepresenter:
    """Evaluable correction direction for one functional."""

    functional: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    sup_bound: float = float("nan")

    def with_sup_bound(self, data: Dataset) -> "RieszRepresenter":
        pts = np.column_stack([data.d, data.x])
        bound = float(np.max(np.abs(self.evaluate(pts))))
        return RieszRepresenter(self.functional, self.evaluate, bound)


def _sigmoid(z):
    return gp_laplace.link(z)


def fit_propensity(data: Dataset, kind: str = "logistic-regression",
                   gp_spec: kernel.KernelSpec = None) -> PropensityModel:
    """Fit the propensity score by Newton-scored ML (or a GP classifier)."""
    if kind == "logistic-regression":
        return _fit_logistic(data)
    if kind == "gp-classifier":
        return _fit_gp_propensity(data, gp_spec)
    raise ConfigurationError(f"unknown propensity kind {kind!r}")


def _fit_logistic(data: Dataset) -> PropensityModel:
    d, x = data.d, data.x
    if not np.isin(d, (0.0, 1.0)).all():
        raise ValidationError("propensity fitting needs a binary treatment")
    X = np.column_stack([np.ones(data.n), x])
    beta = np.zeros(X.shape[1])
    separation = False
    for _ in range(60):
        z = X @ beta
        p = _sigmoid(z)
        w = p * (1.0 - p)
        grad = X.T @ (d - p)
        H = (X * w[:, None]).T @ X + 1e-10 * np.eye(X.shape[1])
        step = np.linalg.solve(H, grad)
        beta = beta + step
        if np.linalg.norm(beta) > SEPARATION_NORM_BOUND:
            separation = True
            break
        if np.max(np.abs(grad)) < 1e-8:
            break
    fitted = _sigmoid(X @ beta)
    if np.min(np.minimum(fitted, 1.0 - fitted)) < PROPENSITY_CLIP:
        separation = True
    log_lik = float(np.sum(d * (X @ beta) - np.logaddexp(0.0, X @ beta)))

    def evaluate(x_new: np.ndarray) -> np.ndarray:
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        z = beta[0] + x_new @ beta[1:]
        return np.clip(_sigmoid(z), PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)

    return PropensityModel("logistic-regression", beta, evaluate,
                           separation_flag=separation, log_lik=log_lik)


def _fit_gp_propensity(data: Dataset, spec: kernel.KernelSpec = None) -> PropensityModel:
    x = data.x
    if spec is None:
        a = np.full(data.p, 1.0 / np.sqrt(data.p))
        spec = kernel.KernelSpec(nu2=1.0, inv_lengthscales=a)
    K = kernel.corrected_matrix(spec, x) + kernel.default_jitter(spec) * np.eye(data.n)
    mode = gp_laplace.newton_mode(K, data.d)

    def evaluate(x_new: np.ndarray) -> np.ndarray:
        x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
        mean = kernel.corrected_matrix(spec, x_new, x) @ mode.gradient
        return np.clip(_sigmoid(mean), PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)

    return PropensityModel("gp-classifier", mode, evaluate, log_lik=mode.log_ml)


def fit_pilot_outcome(data: Dataset, spec: kernel.KernelSpec) -> OutcomeModel:
    """Posterior mean of the uncorrected GP classifier as the pilot m-hat."""
    base_spec = kernel.KernelSpec(spec.nu2, spec.inv_lengthscales)  # drop correction
    # a spec sized p models the covariates alone (policy-effect path)
    W = np.column_stack([data.d, data.x]) if base_spec.dim == data.p + 1 else data.x
    K = kernel.corrected_matrix(base_spec, W) + kernel.default_jitter(base_spec) * np.eye(data.n)
    mode = gp_laplace.newton_mode(K, data.y)

    def eta_mean(points: np.ndarray) -> np.ndarray:
        return kernel.corrected_matrix(base_spec, np.atleast_2d(points), W) @ mode.gradient

    return OutcomeModel(eta_mean, base_spec, mode.log_ml)


def riesz_ate(pm: PropensityModel) -> RieszRepresenter:
    """gamma(d, x) = d / pi(x) - (1 - d) / (1 - pi(x))."""

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points[:, 0]
        pi = pm.evaluate(points[:, 1:])
        return d / pi - (1.0 - d) / (1.0 - pi)

    return RieszRepresenter(ATE, evaluate)


def riesz_mar(pm: PropensityModel) -> RieszRepresenter:
    """gamma(d, x) = d / pi(x); exactly zero on unobserved rows."""

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points[:, 0]
        pi = pm.evaluate(points[:, 1:])
        return d / pi

    return RieszRepresenter(MAR, evaluate)


def product_kde(x: np.ndarray):
    """Product Gaussian KDE with per-dimension Silverman bandwidths."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    sd = np.std(x, axis=0, ddof=1)
    h = sd * (4.0 / ((p + 2.0) * n)) ** (1.0 / (p + 4.0))
    h = np.maximum(h, 1e-12)

    def density(q: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        z = (q[:, None, :] - x[None, :, :]) / h
        k = np.exp(-0.5 * np.sum(z * z, axis=2)) / np.prod(h * np.sqrt(2 * np.pi))
        return np.mean(k, axis=1)

    return density


def riesz_ape(g1, g0, data: Dataset, f_hat=None,
              floor: float = KDE_FLOOR) -> RieszRepresenter:
    """gamma(x) = (g1(x) - g0(x)) / f(x), with a floored density estimate."""
    if f_hat is None:
        if data.p > 3:
            raise ConfigurationError(
                "default KDE supports p <= 3; supply f_hat for higher dimension"
            )
        f_hat = product_kde(data.x)
    cap = 1.0 / floor

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = points[:, 1:]
        f = np.maximum(np.asarray(f_hat(x), dtype=float), floor)
        num = np.asarray(g1(x), dtype=float) - np.asarray(g0(x), dtype=float)
        return np.clip(num / f, -cap, cap)

    return RieszRepresenter(APE, evaluate)


def riesz_ad(data: Dataset) -> RieszRepresenter:
    """Score of the Gaussian linear model D | X ~ N(x'beta, s^2)."""
    X = np.column_stack([np.ones(data.n), data.x])
    beta, *_ = np.linalg.lstsq(X, data.d, rcond=None)
    resid = data.d - X @ beta
    s2 = float(np.mean(resid ** 2))
    if s2 < 1e-8:
        raise DegenerateSampleError("treatment has (near) zero residual variance")

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = points[:, 0]
        mu = beta[0] + points[:, 1:] @ beta[1:]
        return -(d - mu) / s2

    return RieszRepresenter(AD, evaluate)


def sigma_rule(p: int, n: int, gamma_abs_sum: float,
               c_sigma: float = 1.0) -> float:
    """sigma_n = c_sigma * sqrt(p n log n) / sum_i |gamma(D_i, X_i)|."""
    if n < 2:
        raise ConfigurationError(f"need n >= 2, got {n}")
    if gamma_abs_sum <= 0:
        raise ConfigurationError("sum of |gamma| must be positive")
    return c_sigma * np.sqrt(p * n * np.log(n)) / gamma_abs_sum
