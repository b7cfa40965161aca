"""Doubly robust Bayesian inference for average treatment effects.

Propensity-score-corrected Gaussian process priors, Laplace-approximated
posterior sampling, Bayesian-bootstrap aggregation, posterior recentering,
frequentist AIPW comparison, and a Monte Carlo benchmark harness, with
extensions to average policy effects, average derivatives, and means under
outcomes missing at random.
"""

from .data_model import Dataset, SplitPlan, load_csv, make_split, trim_by_overlap
from .dr_core import (CredibleSummary, FunctionalDraws, ProcedureConfig,
                      bootstrap_weights, plug_in_draw, recentering_term,
                      run_procedure, summarize)
from .frequentist import FrequentistEstimate, aipw, plug_in
from .gp_laplace import (LaplaceFit, PredictiveGaussian, fit_laplace, link,
                         log_lik_terms, predict, sample_functions)
from .kernel import (GramMatrices, KernelSpec, corrected_kernel, gram,
                     optimize_hyperparameters, se_kernel)
from .nuisance import (OutcomeModel, PropensityModel, RieszRepresenter,
                       fit_pilot_outcome, fit_propensity, riesz_ad, riesz_ape,
                       riesz_ate, riesz_mar, sigma_rule)
from .simulation import DesignSpec, MCConfig, MCReport, generate, run_mc, true_ate

__version__ = "0.1.0"

__all__ = [
    "Dataset", "SplitPlan", "load_csv", "make_split", "trim_by_overlap",
    "CredibleSummary", "FunctionalDraws", "ProcedureConfig",
    "bootstrap_weights", "plug_in_draw", "recentering_term", "run_procedure",
    "summarize", "FrequentistEstimate", "aipw", "plug_in",
    "LaplaceFit", "PredictiveGaussian", "fit_laplace", "link",
    "log_lik_terms", "predict", "sample_functions",
    "GramMatrices", "KernelSpec", "corrected_kernel", "gram",
    "optimize_hyperparameters", "se_kernel",
    "OutcomeModel", "PropensityModel", "RieszRepresenter",
    "fit_pilot_outcome", "fit_propensity", "riesz_ad", "riesz_ape",
    "riesz_ate", "riesz_mar", "sigma_rule",
    "DesignSpec", "MCConfig", "MCReport", "generate", "run_mc", "true_ate",
]
