"""Synthetic designs, ground-truth effects and the Monte Carlo harness.

Both designs draw standard normal covariates, a Bernoulli treatment with
logistic index g(x) = sum_j x_j / j, and a Bernoulli outcome with logistic
index mu(x) + d tau(x). Design I uses linear mu and tau; Design II bends
both through sines and cosines.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import dr_core, frequentist, nuisance
from .data_model import Dataset
from .errors import (ConfigurationError, DrBayesError, FailureBudgetExceeded,
                     ValidationError)
from .gp_laplace import link

DESIGN_I = "I"
DESIGN_II = "II"

BAYES_METHODS = (dr_core.UNCORRECTED, dr_core.PRIOR_CORRECTED,
                 dr_core.DOUBLY_ROBUST)
FREQ_METHODS = ("aipw", "plug-in")

_TRUE_ATE_CACHE: dict = {}


@dataclass(frozen=True)
class DesignSpec:
    design: str
    n: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.design not in (DESIGN_I, DESIGN_II):
            raise ConfigurationError(f"unknown design {self.design!r}")
        if self.design == DESIGN_I and self.p < 5:
            raise ConfigurationError("Design I needs p >= 5")
        if self.design == DESIGN_II and self.p < 3:
            raise ConfigurationError("Design II needs p >= 3")
        if self.n < 2:
            raise ConfigurationError(f"n must be >= 2, got {self.n}")


def treatment_index(x: np.ndarray) -> np.ndarray:
    """g(x) = sum_j x_j / j."""
    p = x.shape[1]
    return x @ (1.0 / np.arange(1, p + 1))


def outcome_indices(design: str, x: np.ndarray):
    """(mu(x), tau(x)) for the requested design."""
    p = x.shape[1]
    if design == DESIGN_I:
        mu = -2.0 + 0.2 * x.sum(axis=1)
        tau = 1.0 + 0.1 * x[:, :5].sum(axis=1)
    else:
        j = np.arange(1, p + 1)
        mu = -2.0 + 0.4 * (np.sin(x) / np.cbrt(j)).sum(axis=1)
        tau = (np.cos(x[:, :3]) / np.arange(1, 4)).sum(axis=1)
    return mu, tau


def _rng_for(spec: DesignSpec, *tags: int):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([spec.seed, *tags])))


def generate(spec: DesignSpec, rng=None) -> Dataset:
    """One synthetic sample; deterministic given the spec seed."""
    if rng is None:
        rng = _rng_for(spec, 0)
    x = rng.standard_normal((spec.n, spec.p))
    d = (rng.random(spec.n) < link(treatment_index(x))).astype(float)
    mu, tau = outcome_indices(spec.design, x)
    y = (rng.random(spec.n) < link(mu + d * tau)).astype(float)
    return Dataset(y, d, x)


def true_ate(spec: DesignSpec, mc_points: int = 10 ** 6, rng=None,
             antithetic: bool = True, return_se: bool = False):
    """Monte Carlo value of E[psi(mu + tau) - psi(mu)] over normal X.

    Antithetic pairing of the covariate draws is used by default. The value
    per (design, p) is cached in-process.
    """
    key = (spec.design, spec.p, mc_points, antithetic)
    if not return_se and rng is None and key in _TRUE_ATE_CACHE:
        return _TRUE_ATE_CACHE[key][0]
    if rng is None:
        rng = _rng_for(spec, 98, 76)
    m = mc_points // 2 if antithetic else mc_points
    x = rng.standard_normal((m, spec.p))
    xs = np.vstack([x, -x]) if antithetic else x
    mu, tau = outcome_indices(spec.design, xs)
    contrib = link(mu + tau) - link(mu)
    if antithetic:
        pair_means = 0.5 * (contrib[:m] + contrib[m:])
        value = float(np.mean(pair_means))
        se = float(np.std(pair_means) / np.sqrt(m))
    else:
        value = float(np.mean(contrib))
        se = float(np.std(contrib) / np.sqrt(m))
    _TRUE_ATE_CACHE[key] = (value, se)
    return (value, se) if return_se else value


@dataclass(frozen=True)
class MethodRow:
    method: str
    bias: float
    cp: float
    cp_se: float
    cil: float
    replications: int
    successes: int
    failures: int


@dataclass(frozen=True)
class MCReport:
    design: DesignSpec
    true_value: float
    alpha: float
    rows: tuple

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "bias", "cp", "cp_se", "cil",
                             "replications", "successes", "failures"])
            for r in self.rows:
                writer.writerow([r.method, r.bias, r.cp, r.cp_se, r.cil,
                                 r.replications, r.successes, r.failures])

    def to_text(self) -> str:
        head = (f"Design {self.design.design}  n={self.design.n} "
                f"p={self.design.p}  true={self.true_value:.4f}  "
                f"alpha={self.alpha}")
        lines = [head,
                 f"{'Method':<16}{'Bias':>10}{'CP':>8}{'CP se':>8}"
                 f"{'CIL':>8}{'fail':>6}"]
        for r in self.rows:
            lines.append(f"{r.method:<16}{r.bias:>10.4f}{r.cp:>8.3f}"
                         f"{r.cp_se:>8.3f}{r.cil:>8.3f}{r.failures:>6d}")
        return "\n".join(lines)


@dataclass(frozen=True)
class MCConfig:
    """Harness settings wrapped around a base procedure config."""

    proc: dr_core.ProcedureConfig = field(
        default_factory=dr_core.ProcedureConfig)
    n_jobs: int = 1
    failure_budget: float = 0.05
    true_ate_points: int = 10 ** 6


def _one_replication(spec: DesignSpec, methods, alpha: float,
                     config: MCConfig, r: int):
    """Estimate every requested method on a fresh sample; shares fits."""
    data = generate(spec, rng=_rng_for(spec, r, 0))
    proc_seed_entropy = int(
        np.random.SeedSequence([spec.seed, r, 1]).generate_state(1)[0])
    out = {}
    cache: dict = {}
    for method in methods:
        try:
            if method in BAYES_METHODS:
                cfg = replace(config.proc, variant=method, alpha=alpha,
                              seed=proc_seed_entropy)
                _, summary, diag = dr_core.run_procedure(data, cfg, cache=cache)
                if not diag.get("laplace_converged", True):
                    raise DrBayesError("Laplace fit did not converge")
                out[method] = (summary.point, summary.lower, summary.upper)
            elif method in FREQ_METHODS:
                est = _frequentist_estimate(data, method, alpha, config, cache,
                                            proc_seed_entropy)
                out[method] = (est.estimate, est.ci_lower, est.ci_upper)
            else:
                raise ConfigurationError(f"unknown method {method!r}")
        except ConfigurationError:
            raise
        except (DrBayesError, np.linalg.LinAlgError):
            out[method] = None
    return out


def _frequentist_estimate(data: Dataset, method: str, alpha: float,
                          config: MCConfig, cache: dict, seed: int):
    """AIPW / plug-in on the same pilot fits the Bayes variants use."""
    cfg = replace(config.proc, variant=dr_core.DOUBLY_ROBUST, alpha=alpha,
                  seed=seed, B=2)
    # run once with a tiny draw count to populate the nuisance cache
    key = ("nuisance", cfg.functional, cfg.propensity_kind)
    if key not in cache:
        dr_core.run_procedure(data, cfg, cache=cache)
    gamma_hat, m_hat, _, _ = cache[key]
    if method == "aipw":
        return frequentist.aipw(data, m_hat, gamma_hat, alpha)
    return frequentist.plug_in(data, m_hat, alpha)


def run_mc(spec: DesignSpec, methods: Sequence[str], replications: int,
           alpha: float = 0.05, config: MCConfig = None) -> MCReport:
    """Replicate estimation and aggregate bias / coverage / interval length.

    Replication r uses counter-based streams keyed by (spec seed, r), so the
    report is identical for any worker count.
    """
    if replications < 1:
        raise ConfigurationError("replications must be >= 1")
    if config is None:
        config = MCConfig()
    methods = tuple(methods)
    chi0 = true_ate(spec, config.true_ate_points)

    results = Parallel(n_jobs=config.n_jobs)(
        delayed(_one_replication)(spec, methods, alpha, config, r)
        for r in range(replications))

    rows = []
    for method in methods:
        ests, covers, lengths, failures = [], [], [], 0
        for res in results:
            rec = res[method]
            if rec is None:
                failures += 1
                continue
            est, lo, hi = rec
            ests.append(est)
            covers.append(lo <= chi0 <= hi)
            lengths.append(hi - lo)
        successes = len(ests)
        if failures > config.failure_budget * replications:
            raise FailureBudgetExceeded(
                f"{method}: {failures}/{replications} replications failed")
        cp = float(np.mean(covers)) if successes else float("nan")
        cp_se = float(np.sqrt(cp * (1 - cp) / successes)) if successes else float("nan")
        rows.append(MethodRow(
            method=method,
            bias=float(np.mean(ests) - chi0) if successes else float("nan"),
            cp=cp, cp_se=cp_se,
            cil=float(np.mean(lengths)) if successes else float("nan"),
            replications=replications, successes=successes,
            failures=failures))
    return MCReport(spec, chi0, alpha, tuple(rows))
