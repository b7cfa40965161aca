"""Squared-exponential covariance with an optional rank-one correction.

Points live in R^(p+1): the treatment coordinate first, then the covariates.
The corrected kernel adds ``sigma_n**2 * gamma(w) * gamma(w')`` on top of the
anisotropic squared-exponential value, which realizes a prior with an extra
independent N(0, sigma_n^2) coefficient on the estimated representer
direction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, NumericError, ValidationError

JITTER_SCALE = 1e-8
LOG_BOUND = np.log(1e3)  # |log a_l|, |log nu| search bound


@dataclass(frozen=True)
class KernelSpec:
    """Hyperparameters of the (optionally corrected) SE kernel.

    ``inv_lengthscales`` holds the per-dimension rescaling factors
    (a_0, ..., a_p); the first entry multiplies the treatment coordinate.
    ``correction`` evaluates the representer on an (m, p+1) array of points.
    """

    nu2: float
    inv_lengthscales: np.ndarray
    sigma_n: float = 0.0
    correction: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        a = np.asarray(self.inv_lengthscales, dtype=float)
        if self.nu2 <= 0:
            raise ValidationError(f"nu2 must be positive, got {self.nu2}")
        if (a < 0).any():
            raise ValidationError("inv_lengthscales must be nonnegative")
        if self.sigma_n < 0:
            raise ValidationError(f"sigma_n must be nonnegative, got {self.sigma_n}")
        if self.sigma_n > 0 and self.correction is None:
            raise ValidationError("sigma_n > 0 requires a correction function")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "inv_lengthscales", a)

    @property
    def dim(self) -> int:
        return self.inv_lengthscales.size

    def to_json_dict(self) -> dict:
        return {
            "nu2": float(self.nu2),
            "inv_lengthscales": [float(v) for v in self.inv_lengthscales],
            "sigma_n": float(self.sigma_n),
        }

    @classmethod
    def from_json_dict(cls, d: dict, correction=None) -> "KernelSpec":
        return cls(
            nu2=float(d["nu2"]),
            inv_lengthscales=np.asarray(d["inv_lengthscales"], dtype=float),
            sigma_n=float(d.get("sigma_n", 0.0)),
            correction=correction,
        )


@dataclass(frozen=True)
class GramMatrices:
    """Kernel matrices for training points W and evaluation points W*."""

    K_train: np.ndarray
    K_cross: np.ndarray
    K_eval: np.ndarray
    jitter: float


def _check_point(w, dim) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != dim:
        raise ValidationError(f"point has dimension {w.size}, kernel expects {dim}")
    return w


def se_kernel(w, w2, spec: KernelSpec) -> float:
    """Anisotropic squared-exponential covariance between two points."""
    w = _check_point(w, spec.dim)
    w2 = _check_point(w2, spec.dim)
    z = (w - w2) * spec.inv_lengthscales
    return float(spec.nu2 * np.exp(-0.5 * z @ z))


def corrected_kernel(w, w2, spec: KernelSpec) -> float:
    """SE covariance plus the rank-one representer term."""
    base = se_kernel(w, w2, spec)
    if spec.sigma_n == 0.0:
        return base
    g = spec.correction(np.vstack([np.asarray(w, float).ravel(),
                                   np.asarray(w2, float).ravel()]))
    return base + spec.sigma_n ** 2 * float(g[0]) * float(g[1])


def se_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray = None) -> np.ndarray:
    """Vectorized SE kernel matrix between row-point sets A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sa = A * spec.inv_lengthscales
    if B is None:
        d2 = cdist(sa, sa, metric="sqeuclidean")
    else:
        B = np.atleast_2d(np.asarray(B, dtype=float))
        d2 = cdist(sa, B * spec.inv_lengthscales, metric="sqeuclidean")
    return spec.nu2 * np.exp(-0.5 * d2)


def corrected_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray = None) -> np.ndarray:
    K = se_matrix(spec, A, B)
    if spec.sigma_n > 0.0:
        ga = spec.correction(np.atleast_2d(A))
        gb = ga if B is None else spec.correction(np.atleast_2d(B))
        K = K + spec.sigma_n ** 2 * np.outer(ga, gb)
    return K


def default_jitter(spec: KernelSpec) -> float:
    return JITTER_SCALE * spec.nu2


def gram(spec: KernelSpec, W_train: np.ndarray, W_eval: np.ndarray,
         jitter: float = None) -> GramMatrices:
    """Assemble training/cross/evaluation kernel matrices.

    Jitter is added to the diagonals of the two square matrices only.
    """
    W_train = np.atleast_2d(np.asarray(W_train, dtype=float))
    W_eval = np.atleast_2d(np.asarray(W_eval, dtype=float))
    if W_train.shape[1] != spec.dim or W_eval.shape[1] != spec.dim:
        raise ValidationError("point dimension does not match the kernel spec")
    if jitter is None:
        jitter = default_jitter(spec)
    K_train = corrected_matrix(spec, W_train)
    K_cross = corrected_matrix(spec, W_eval, W_train)
    K_eval = corrected_matrix(spec, W_eval)
    for M in (K_train, K_cross, K_eval):
        if not np.isfinite(M).all():
            raise NumericError("non-finite kernel value in Gram assembly")
    K_train = K_train + jitter * np.eye(W_train.shape[0])
    K_eval = K_eval + jitter * np.eye(W_eval.shape[0])
    return GramMatrices(K_train, K_cross, K_eval, jitter)


def ate_eval_points(x: np.ndarray) -> np.ndarray:
    """Stack (1, X) above (0, X): the 2n evaluation points for the contrast."""
    x = np.atleast_2d(x)
    n = x.shape[0]
    return np.vstack([
        np.column_stack([np.ones(n), x]),
        np.column_stack([np.zeros(n), x]),
    ])


def minimax_rescale_rate(n: int, smoothness: float, p: int) -> float:
    """Theoretical rescaling rate n^(1/(2s+p)) (log n)^(-(1+p)/(2s+p)).

    Exposed for documentation and tests; marginal likelihood is the default
    data-driven choice.
    """
    e = 2.0 * smoothness + p
    return n ** (1.0 / e) * np.log(n) ** (-(1.0 + p) / e)


def _pack(spec: KernelSpec, share: bool) -> np.ndarray:
    a = np.maximum(spec.inv_lengthscales, 1e-3)
    if share:
        # treatment coordinate plus one shared covariate scale
        return np.log(np.array([spec.nu2, a[0], float(np.mean(a[1:]))]))
    return np.log(np.concatenate([[spec.nu2], a]))


def _unpack(theta: np.ndarray, spec: KernelSpec, share: bool) -> KernelSpec:
    theta = np.clip(theta, -LOG_BOUND, LOG_BOUND)
    if share:
        a = np.concatenate([[np.exp(theta[1])],
                            np.full(spec.dim - 1, np.exp(theta[2]))])
    else:
        a = np.exp(theta[1:])
    return replace(spec, nu2=float(np.exp(theta[0])), inv_lengthscales=a,
                   sigma_n=0.0, correction=None)


def laplace_log_ml(spec: KernelSpec, W: np.ndarray, y: np.ndarray) -> float:
    """Laplace-approximate log marginal likelihood of the uncorrected GP."""
    from .gp_laplace import newton_mode

    K = corrected_matrix(spec, W) + default_jitter(spec) * np.eye(len(y))
    mode = newton_mode(K, np.asarray(y, float))
    return mode.log_ml


def optimize_hyperparameters(data, init: KernelSpec, budget: int,
                             n_starts: int = 3, share_lengthscales: bool = False,
                             rng=None) -> KernelSpec:
    """Maximize the Laplace log marginal likelihood over kernel scales.

    Derivative-free simplex descent in log(nu2), log(a_l); sigma_n is never
    searched over (the fit is uncorrected). ``budget`` caps the total number
    of objective evaluations across starts. With ``share_lengthscales`` the
    covariate scales are tied, shrinking the search to three parameters.
    """
    if budget < 1:
        raise ConfigurationError(f"budget must be >= 1, got {budget}")
    x = np.atleast_2d(data.x)
    # a spec sized p (rather than p+1) models the covariates alone
    W = np.column_stack([data.d, x]) if init.dim == x.shape[1] + 1 else x
    y = data.y
    base = replace(init, sigma_n=0.0, correction=None)

    def objective(theta):
        try:
            return -laplace_log_ml(_unpack(theta, base, share_lengthscales), W, y)
        except np.linalg.LinAlgError:
            return np.inf

    theta0 = _pack(base, share_lengthscales)
    f0 = objective(theta0)
    if not np.isfinite(f0):
        raise NumericError("log marginal likelihood is non-finite at init")
    if budget == 1:
        return init

    rng = np.random.default_rng(0) if rng is None else rng
    starts = [theta0]
    for _ in range(n_starts - 1):
        starts.append(theta0 + rng.normal(scale=1.0, size=theta0.size))
    per_start = max(budget // len(starts), 2)

    best_theta, best_f = theta0, f0
    for s in starts:
        res = minimize(objective, s, method="Nelder-Mead",
                       options={"maxfev": per_start, "xatol": 1e-3, "fatol": 1e-4})
        if res.fun < best_f:
            best_theta, best_f = res.x, res.fun
    out = _unpack(best_theta, base, share_lengthscales)
    return replace(out, sigma_n=init.sigma_n, correction=init.correction)
