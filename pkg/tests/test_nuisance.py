import numpy as np
import pytest

from drbayes.data_model import Dataset
from drbayes.errors import (ConfigurationError, DegenerateSampleError,
                            ValidationError)
from drbayes.gp_laplace import link
from drbayes.kernel import KernelSpec
from drbayes.nuisance import (fit_pilot_outcome, fit_propensity, product_kde,
                              riesz_ad, riesz_ape, riesz_ate, riesz_mar,
                              sigma_rule)
from drbayes.simulation import DesignSpec, generate, treatment_index


def constant_propensity(value):
    """A stand-in PropensityModel exposing only evaluate()."""
    pm = fit_propensity(Dataset([1, 0], [1, 0], [[0.0], [1.0]]))
    object.__setattr__(pm, "evaluate",
                       lambda x: np.full(np.atleast_2d(x).shape[0], value))
    return pm


class TestFitPropensity:
    def test_constant_treatment_flags_separation(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.integers(0, 2, 40), np.ones(40),
                       rng.standard_normal((40, 2)))
        pm = fit_propensity(data)
        assert pm.separation_flag
        assert np.all(pm.evaluate(data.x) >= 1.0 - 1e-3)

    def test_independent_treatment_recovers_rate(self):
        rng = np.random.default_rng(1)
        n = 2000
        d = (rng.random(n) < 0.3).astype(float)
        data = Dataset(rng.integers(0, 2, n), d, rng.standard_normal((n, 3)))
        pm = fit_propensity(data)
        assert np.mean(pm.evaluate(data.x)) == pytest.approx(0.3, abs=0.03)

    def test_recovers_design_direction(self):
        """Fitted slope aligns with the generating coefficients 1/j."""
        data = generate(DesignSpec("I", 5000, 15, seed=2))
        pm = fit_propensity(data)
        beta = np.asarray(pm.parameters)[1:]
        truth = 1.0 / np.arange(1, 16)
        cos = beta @ truth / (np.linalg.norm(beta) * np.linalg.norm(truth))
        assert cos >= 0.9

    def test_beats_intercept_only(self):
        data = generate(DesignSpec("I", 500, 5, seed=3))
        pm = fit_propensity(data)
        pbar = np.mean(data.d)
        ll0 = np.sum(data.d * np.log(pbar) + (1 - data.d) * np.log(1 - pbar))
        assert pm.log_lik >= ll0

    def test_evaluations_strictly_inside_unit_interval(self):
        data = generate(DesignSpec("I", 200, 5, seed=4))
        pm = fit_propensity(data)
        ps = pm.evaluate(data.x * 50)  # extreme extrapolation
        assert np.all(ps > 0) and np.all(ps < 1)

    def test_covariate_permutation_equivariance(self):
        data = generate(DesignSpec("I", 400, 5, seed=5))
        pm = fit_propensity(data)
        perm = np.array([2, 0, 4, 1, 3])
        data2 = Dataset(data.y, data.d, data.x[:, perm])
        pm2 = fit_propensity(data2)
        b1 = np.asarray(pm.parameters)[1:]
        b2 = np.asarray(pm2.parameters)[1:]
        np.testing.assert_allclose(b2, b1[perm], atol=1e-6)

    def test_continuous_treatment_rejected(self):
        data = Dataset([1, 0], [0.4, 0.1], [[0.0], [1.0]],
                       continuous_treatment=True)
        with pytest.raises(ValidationError):
            fit_propensity(data)

    def test_gp_classifier_kind(self):
        data = generate(DesignSpec("I", 80, 5, seed=6))
        pm = fit_propensity(data, kind="gp-classifier")
        ps = pm.evaluate(data.x)
        assert np.all((ps > 0) & (ps < 1))
        # should at least separate the two arms on average
        assert np.mean(ps[data.d == 1]) > np.mean(ps[data.d == 0])

    def test_unknown_kind(self):
        data = generate(DesignSpec("I", 50, 5, seed=7))
        with pytest.raises(ConfigurationError):
            fit_propensity(data, kind="forest")


class TestFitPilotOutcome:
    def test_all_ones_pull(self):
        rng = np.random.default_rng(8)
        data = Dataset(np.ones(50), rng.integers(0, 2, 50),
                       rng.standard_normal((50, 2)))
        m = fit_pilot_outcome(data, KernelSpec(1.0, np.full(3, 0.5)))
        pts = np.column_stack([data.d, data.x])
        assert np.all(m.evaluate(pts) >= 0.5)

    def test_symmetric_design(self):
        rng = np.random.default_rng(9)
        n = 80
        d = np.repeat([1.0, 0.0], n // 2)
        x = np.tile(rng.standard_normal((n // 2, 1)), (2, 1))
        data = Dataset(d.copy(), d, x)  # y = d exactly, covariates mirrored
        m = fit_pilot_outcome(data, KernelSpec(1.0, np.array([1.0, 0.7])))
        m1 = m.evaluate(np.column_stack([np.ones(n), x]))
        m0 = m.evaluate(np.column_stack([np.zeros(n), x]))
        np.testing.assert_allclose(m1, 1.0 - m0, atol=0.05)

    def test_matches_predictive_mean(self):
        from drbayes import gp_laplace, kernel
        data = generate(DesignSpec("I", 40, 5, seed=10))
        spec = KernelSpec(1.0, np.full(6, 0.6))
        m = fit_pilot_outcome(data, spec)
        W = np.column_stack([data.d, data.x])
        g = kernel.gram(spec, W, W)
        fit = gp_laplace.fit_laplace(g, data.y)
        pred = gp_laplace.predict(fit)
        np.testing.assert_allclose(m.evaluate(W), link(pred.mean), atol=1e-8)

    def test_values_in_unit_interval(self):
        data = generate(DesignSpec("I", 60, 5, seed=11))
        m = fit_pilot_outcome(data, KernelSpec(2.0, np.full(6, 0.4)))
        pts = np.column_stack([data.d, data.x])
        v = m.evaluate(pts)
        assert np.all((v > 0) & (v < 1))


class TestRieszRepresenters:
    def test_ate_symmetric_score(self):
        pm = constant_propensity(0.5)
        rep = riesz_ate(pm)
        assert rep.evaluate([[1.0, 0.3]])[0] == pytest.approx(2.0)
        assert rep.evaluate([[0.0, 0.3]])[0] == pytest.approx(-2.0)

    def test_ate_asymmetric_scores(self):
        rep = riesz_ate(constant_propensity(0.8))
        assert rep.evaluate([[1.0, 0.0]])[0] == pytest.approx(1.25)
        assert rep.evaluate([[0.0, 0.0]])[0] == pytest.approx(-5.0)
        rep2 = riesz_ate(constant_propensity(0.2))
        assert rep2.evaluate([[0.0, 0.0]])[0] == pytest.approx(-1.25)

    def test_ate_sign_and_product_identities(self):
        data = generate(DesignSpec("I", 300, 5, seed=12))
        pm = fit_propensity(data)
        rep = riesz_ate(pm)
        pi = pm.evaluate(data.x)
        g1 = rep.evaluate(np.column_stack([np.ones(data.n), data.x]))
        g0 = rep.evaluate(np.column_stack([np.zeros(data.n), data.x]))
        assert np.all(g1 > 0) and np.all(g0 < 0)
        np.testing.assert_allclose(g1 * pi, 1.0, atol=1e-10)
        np.testing.assert_allclose(g0 * (1 - pi), -1.0, atol=1e-10)

    def test_mar_definition(self):
        rep = riesz_mar(constant_propensity(0.5))
        assert rep.evaluate([[1.0, 0.0]])[0] == pytest.approx(2.0)
        assert rep.evaluate([[0.0, 0.0]])[0] == 0.0
        rep2 = riesz_mar(constant_propensity(0.25))
        assert rep2.evaluate([[1.0, 0.0]])[0] == pytest.approx(4.0)

    def test_sup_bound_matches_scan(self):
        data = generate(DesignSpec("I", 200, 5, seed=13))
        rep = riesz_ate(fit_propensity(data)).with_sup_bound(data)
        pts = np.column_stack([data.d, data.x])
        assert rep.sup_bound == pytest.approx(
            np.max(np.abs(rep.evaluate(pts))))


class TestRieszApe:
    def test_null_shift(self):
        rng = np.random.default_rng(14)
        data = Dataset(rng.integers(0, 2, 100), rng.integers(0, 2, 100),
                       rng.standard_normal((100, 2)))
        g = lambda x: np.ones(np.atleast_2d(x).shape[0])
        rep = riesz_ape(g, g, data)
        pts = np.column_stack([data.d, data.x])
        np.testing.assert_array_equal(rep.evaluate(pts), 0.0)

    def test_uniform_example(self):
        rng = np.random.default_rng(15)
        n = 5000
        x = rng.uniform(0, 1, (n, 1))
        data = Dataset(rng.integers(0, 2, n), rng.integers(0, 2, n), x)
        g1 = lambda q: 2.0 * np.atleast_2d(q)[:, 0]
        g0 = lambda q: np.ones(np.atleast_2d(q).shape[0])
        rep = riesz_ape(g1, g0, data)
        val = rep.evaluate(np.array([[0.0, 0.5]]))[0]
        assert val == pytest.approx(0.0, abs=0.1)

    def test_floor_engages_in_far_tail(self):
        rng = np.random.default_rng(16)
        data = Dataset(rng.integers(0, 2, 100), rng.integers(0, 2, 100),
                       rng.standard_normal((100, 1)))
        g1 = lambda q: np.full(np.atleast_2d(q).shape[0], 2.0)
        g0 = lambda q: np.zeros(np.atleast_2d(q).shape[0])
        rep = riesz_ape(g1, g0, data)
        val = rep.evaluate(np.array([[0.0, 500.0]]))
        assert np.isfinite(val[0])
        assert abs(val[0]) <= 1.0 / 1e-3 + 1e-9

    def test_high_dimension_refused(self):
        rng = np.random.default_rng(17)
        data = Dataset(rng.integers(0, 2, 50), rng.integers(0, 2, 50),
                       rng.standard_normal((50, 4)))
        g = lambda q: np.ones(np.atleast_2d(q).shape[0])
        with pytest.raises(ConfigurationError, match="f_hat"):
            riesz_ape(g, g, data)

    def test_kde_matches_normal_density(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((4000, 1))
        f = product_kde(x)
        from scipy.stats import norm
        grid = np.array([[-1.0], [0.0], [1.0]])
        np.testing.assert_allclose(f(grid), norm.pdf(grid[:, 0]), atol=0.05)


class TestRieszAd:
    def test_zero_noise_degenerate(self):
        rng = np.random.default_rng(19)
        x = rng.standard_normal((50, 2))
        d = x @ np.array([1.0, -0.5])
        data = Dataset(rng.integers(0, 2, 50), d, x,
                       continuous_treatment=True)
        with pytest.raises(DegenerateSampleError):
            riesz_ad(data)

    def test_standard_normal_score(self):
        rng = np.random.default_rng(20)
        n = 20000
        d = rng.standard_normal(n)
        data = Dataset(rng.integers(0, 2, n), d, rng.standard_normal((n, 1)),
                       continuous_treatment=True)
        rep = riesz_ad(data)
        val = rep.evaluate(np.array([[2.0, 0.0]]))[0]
        assert val == pytest.approx(-2.0, abs=0.1)

    def test_hand_example(self):
        # gamma = -(d - mu)/s^2 with d=2, mu=1, s^2=0.5 -> -2
        rng = np.random.default_rng(21)
        n = 50
        x = rng.standard_normal((n, 1))
        d = rng.standard_normal(n)
        data = Dataset(rng.integers(0, 2, n), d, x, continuous_treatment=True)
        rep = riesz_ad(data)
        X = np.column_stack([np.ones(n), x])
        beta, *_ = np.linalg.lstsq(X, d, rcond=None)
        s2 = float(np.mean((d - X @ beta) ** 2))
        q = np.array([[2.0, 0.7]])
        mu = beta[0] + 0.7 * beta[1]
        assert rep.evaluate(q)[0] == pytest.approx(-(2.0 - mu) / s2)


class TestSigmaRule:
    def test_worked_example(self):
        # n=100, p=4, |gamma| sums to 200 under pi = 0.5
        val = sigma_rule(4, 100, 200.0)
        assert val == pytest.approx(np.sqrt(400 * np.log(100)) / 200)
        assert val == pytest.approx(0.2146, abs=1e-4)

    def test_zero_c_sigma(self):
        assert sigma_rule(4, 100, 200.0, c_sigma=0.0) == 0.0

    def test_linear_in_c_sigma(self):
        assert sigma_rule(4, 100, 200.0, c_sigma=2.0) == \
            pytest.approx(2 * sigma_rule(4, 100, 200.0))

    def test_monotonicity(self):
        base = sigma_rule(4, 100, 200.0)
        assert sigma_rule(4, 100, 300.0) < base
        assert sigma_rule(8, 100, 200.0) > base
        assert sigma_rule(4, 400, 200.0) > base

    def test_zero_sum_rejected(self):
        with pytest.raises(ConfigurationError):
            sigma_rule(4, 100, 0.0)


def test_treatment_index_formula():
    x = np.array([[1.0, 2.0, 3.0]])
    assert treatment_index(x)[0] == pytest.approx(1 + 1 + 1)
