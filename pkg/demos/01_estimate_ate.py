"""Estimate an average treatment effect on one synthetic sample.

Walks the three-step procedure end to end: simulate a confounded binary
outcome, run the uncorrected / prior-corrected / doubly robust variants with
shared seeds, and compare their credible intervals against the true effect
and the frequentist AIPW interval.

Run:  python3 demos/01_estimate_ate.py
"""

import numpy as np

from drbayes import (DesignSpec, ProcedureConfig, aipw, fit_pilot_outcome,
                     fit_propensity, generate, riesz_ate, run_procedure,
                     true_ate)
from drbayes.kernel import KernelSpec

spec = DesignSpec("I", n=500, p=15, seed=42)
data = generate(spec)
chi0 = true_ate(spec)
print(f"one Design I sample: n={data.n}, p={data.p}, true ATE = {chi0:.4f}\n")

cache = {}  # lets the three variants share pilot fits and posterior draws
for variant in ("uncorrected", "prior-corrected", "doubly-robust"):
    config = ProcedureConfig(variant=variant, B=1000, seed=7)
    draws, summary, diag = run_procedure(data, config, cache=cache)
    covered = "covers" if summary.lower <= chi0 <= summary.upper else "misses"
    print(f"{variant:<16} {summary.point:+.4f} "
          f"[{summary.lower:+.4f}, {summary.upper:+.4f}]  {covered} truth "
          f"(sigma_n = {diag['sigma_n']:.3f})")

# the frequentist comparator reuses the same pilot models
pm = fit_propensity(data)
gamma = riesz_ate(pm)
m_hat = fit_pilot_outcome(
    data, KernelSpec.from_json_dict(diag["kernel"]))
est = aipw(data, m_hat, gamma)
print(f"{'aipw':<16} {est.estimate:+.4f} "
      f"[{est.ci_lower:+.4f}, {est.ci_upper:+.4f}]")

print("\nThe uncorrected posterior concentrates away from the truth; the")
print("rank-one prior correction plus recentering repairs both the center")
print("and the spread of the interval.")
