"""Frequentist comparators: AIPW and the naive plug-in contrast."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .data_model import Dataset
from .kernel import ate_eval_points
from .nuisance import OutcomeModel, RieszRepresenter


@dataclass(frozen=True)
class FrequentistEstimate:
    estimate: float
    se: float
    ci_lower: float
    ci_upper: float
    alpha: float
    method: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _wald(estimate: float, se: float, alpha: float, method: str) -> FrequentistEstimate:
    z = norm.ppf(1.0 - alpha / 2.0)
    return FrequentistEstimate(float(estimate), float(se),
                               float(estimate - z * se),
                               float(estimate + z * se), alpha, method)


def _contrast(data: Dataset, m_hat: OutcomeModel) -> np.ndarray:
    pts = ate_eval_points(data.x)
    m = m_hat.evaluate(pts)
    return m[: data.n] - m[data.n:]


def aipw(data: Dataset, m_hat: OutcomeModel, gamma_hat: RieszRepresenter,
         alpha: float = 0.05) -> FrequentistEstimate:
    """Augmented inverse-probability-weighted double robust estimator.

    Per-observation influence terms are
    m(1,X) - m(0,X) + gamma(D,X) (Y - m(D,X)); the standard error is their
    sample standard deviation over sqrt(n).
    """
    contrast = _contrast(data, m_hat)
    obs_pts = np.column_stack([data.d, data.x])
    m_obs = m_hat.evaluate(obs_pts)
    g = gamma_hat.evaluate(obs_pts)
    phi = contrast + g * (data.y - m_obs)
    est = float(np.mean(phi))
    se = float(np.std(phi) / np.sqrt(data.n))
    return _wald(est, se, alpha, "aipw")


def plug_in(data: Dataset, m_hat: OutcomeModel,
            alpha: float = 0.05) -> FrequentistEstimate:
    """Baseline contrast mean of the pilot outcome model."""
    contrast = _contrast(data, m_hat)
    est = float(np.mean(contrast))
    se = float(np.std(contrast) / np.sqrt(data.n))
    return _wald(est, se, alpha, "plug-in")
