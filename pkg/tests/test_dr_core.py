"""Bootstrap weighting, recentering, summarization and the full pipeline."""

import types

import numpy as np
import pytest

from drbayes import dr_core
from drbayes.data_model import HALF_SPLIT, Dataset
from drbayes.dr_core import (DOUBLY_ROBUST, PRIOR_CORRECTED, UNCORRECTED,
                             FunctionalDraws, ProcedureConfig,
                             bootstrap_weights, plug_in_draw, recentering_term,
                             run_procedure, summarize)
from drbayes.errors import ConfigurationError
from drbayes.nuisance import RieszRepresenter
from drbayes.simulation import DesignSpec, generate


def rng(seed=0):
    return np.random.default_rng(seed)


class TestBootstrapWeights:
    def test_single_point(self):
        assert bootstrap_weights(1, rng())[0] == pytest.approx(1.0)

    def test_simplex(self):
        w = bootstrap_weights(100, rng(1))
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_marginal_mean(self):
        # Dirichlet(1,...,1) marginals have mean 1/n
        draws = np.array([bootstrap_weights(10, rng(2))[0]
                          for _ in range(1)])
        g = rng(2)
        first = np.array([bootstrap_weights(10, g)[0] for _ in range(10 ** 5)])
        assert first.mean() == pytest.approx(0.1, abs=0.005)

    def test_determinism(self):
        np.testing.assert_array_equal(bootstrap_weights(7, rng(3)),
                                      bootstrap_weights(7, rng(3)))


class TestPlugInDraw:
    def test_constant_contrast(self):
        m = lambda d, X: np.full(np.atleast_2d(X).shape[0], 0.4 + 0.3 * d)
        w = bootstrap_weights(6, rng(4))
        assert plug_in_draw(m, w, np.zeros((6, 1))) == pytest.approx(0.3)

    def test_hand_arithmetic(self):
        vals = {1.0: np.array([0.5, 0.9]), 0.0: np.array([0.1, 0.1])}
        m = lambda d, X: vals[d]
        # contrasts are (0.4, 0.8); weights (0.25, 0.75) -> 0.7
        assert plug_in_draw(m, [0.25, 0.75], np.zeros((2, 1))) == \
            pytest.approx(0.7)

    def test_uniform_weights_are_sample_mean(self):
        g = rng(5)
        c1, c0 = g.random(9), g.random(9)
        m = lambda d, X: c1 if d == 1.0 else c0
        out = plug_in_draw(m, np.full(9, 1 / 9), np.zeros((9, 1)))
        assert out == pytest.approx(np.mean(c1 - c0))


def make_rep(fn):
    return RieszRepresenter("ATE", fn)


def make_outcome(fn):
    """Wrap a plain (points)->probability function as an outcome model."""
    model = types.SimpleNamespace()
    model.evaluate = fn
    return model


class TestRecenteringTerm:
    def test_identical_models_give_zero(self):
        data = generate(DesignSpec("I", 30, 5, seed=6))
        m_hat = make_outcome(
            lambda pts: 0.3 + 0.05 * np.atleast_2d(pts)[:, 0])
        m_s = lambda d, X: 0.3 + 0.05 * np.full(np.atleast_2d(X).shape[0], d)
        gam = make_rep(lambda pts: np.ones(np.atleast_2d(pts).shape[0]))
        assert recentering_term(m_s, m_hat, gam, data) == pytest.approx(0.0,
                                                                        abs=1e-14)

    def test_representer_off(self):
        data = generate(DesignSpec("I", 25, 5, seed=7))
        m_hat = make_outcome(lambda pts: np.full(len(np.atleast_2d(pts)), 0.4))
        m_s = lambda d, X: np.full(np.atleast_2d(X).shape[0], 0.2 + 0.5 * d)
        gam = make_rep(lambda pts: np.zeros(len(np.atleast_2d(pts))))
        # contrast of m_s is 0.5, of m_hat is 0 -> difference of means
        assert recentering_term(m_s, m_hat, gam, data) == pytest.approx(0.5)

    def test_single_point_hand_example(self):
        """(0.5-0.2) + 2*(0.6-0.8) = -0.1 on a one-row duck-typed sample."""
        data = types.SimpleNamespace(n=1, d=np.array([1.0]),
                                     x=np.array([[0.0]]))
        ms_vals = {1.0: 0.8, 0.0: 0.3}
        m_s = lambda d, X: np.array([ms_vals[float(d)]]) if np.isscalar(d) \
            else np.array([ms_vals[float(d[0])]])
        mh_vals = {1.0: 0.6, 0.0: 0.4}
        m_hat = make_outcome(
            lambda pts: np.array([mh_vals[float(np.atleast_2d(pts)[0, 0])]]))
        gam = make_rep(lambda pts: np.full(len(np.atleast_2d(pts)), 2.0))
        out = recentering_term(m_s, m_hat, gam, data)
        assert out == pytest.approx(-0.1)

    def test_linear_in_difference(self):
        data = generate(DesignSpec("I", 20, 5, seed=8))
        g = rng(9)
        base = g.random(20)

        def m_hat_fn(pts):
            return np.full(len(np.atleast_2d(pts)), 0.5)

        def delta(d, X):
            X = np.atleast_2d(X)
            return 0.1 * np.tanh(X[:, 0] + np.mean(d))

        gam = make_rep(lambda pts: np.atleast_2d(pts)[:, 1])
        m_hat = make_outcome(m_hat_fn)
        out = {}
        for a in (1.0, 2.5):
            m_s = lambda d, X, a=a: 0.5 + a * delta(d, X)
            out[a] = recentering_term(m_s, m_hat, gam, data)
        assert out[2.5] == pytest.approx(2.5 * out[1.0], rel=1e-10)


class TestSummarize:
    def test_interpolated_quantiles(self):
        d = FunctionalDraws(np.array([1.0, 2, 3, 4, 5]), np.zeros(5),
                            UNCORRECTED, 0)
        s = summarize(d, alpha=0.4)
        assert (s.lower, s.upper) == (pytest.approx(1.8), pytest.approx(4.2))
        assert s.point == pytest.approx(3.0)
        assert s.length == pytest.approx(2.4)

    def test_constant_draws(self):
        d = FunctionalDraws(np.full(10, 0.7), np.zeros(10), UNCORRECTED, 0)
        s = summarize(d, alpha=0.1)
        assert s.length == 0.0
        assert s.lower == s.upper == pytest.approx(0.7)

    def test_normal_quantile_width(self):
        vals = rng(10).standard_normal(5000)
        d = FunctionalDraws(vals, np.zeros(5000), UNCORRECTED, 0)
        s = summarize(d, alpha=0.05)
        assert s.length == pytest.approx(3.92, abs=0.15)

    def test_point_inside_interval_for_symmetric_draws(self):
        vals = rng(11).standard_normal(2000) * 0.3 + 1.2
        d = FunctionalDraws(vals, np.zeros(2000), UNCORRECTED, 0)
        s = summarize(d)
        assert s.lower <= s.point <= s.upper

    def test_too_few_draws(self):
        d = FunctionalDraws(np.array([1.0]), np.zeros(1), UNCORRECTED, 0)
        with pytest.raises(ConfigurationError):
            summarize(d)

    def test_bad_alpha(self):
        d = FunctionalDraws(np.arange(5.0), np.zeros(5), UNCORRECTED, 0)
        with pytest.raises(ConfigurationError):
            summarize(d, alpha=1.5)


class TestProcedureConfig:
    def test_unknown_variant(self):
        with pytest.raises(ConfigurationError):
            ProcedureConfig(variant="triple-robust")

    def test_unknown_functional(self):
        with pytest.raises(ConfigurationError):
            ProcedureConfig(functional="LATE")

    def test_bad_alpha(self):
        with pytest.raises(ConfigurationError):
            ProcedureConfig(alpha=0.0)


FAST = dict(B=40, hyperopt_budget=30, hyperopt_starts=1,
            share_lengthscales=True)


class TestRunProcedure:
    def test_dr_equals_plug_in_minus_recentering(self):
        data = generate(DesignSpec("I", 60, 5, seed=12))
        cfg = ProcedureConfig(variant=DOUBLY_ROBUST, seed=5, **FAST)
        draws, _, _ = run_procedure(data, cfg)
        np.testing.assert_allclose(draws.values,
                                   draws.plug_ins - draws.recenterings,
                                   atol=1e-15)

    def test_uncorrected_recenterings_zero(self):
        data = generate(DesignSpec("I", 60, 5, seed=12))
        cfg = ProcedureConfig(variant=UNCORRECTED, seed=5, **FAST)
        draws, _, _ = run_procedure(data, cfg)
        np.testing.assert_array_equal(draws.recenterings, 0.0)

    def test_c_sigma_zero_links_variants_exactly(self):
        """With the correction weight off, DR = PC minus recenterings."""
        data = generate(DesignSpec("I", 60, 5, seed=13))
        cache = {}
        pc = run_procedure(data, ProcedureConfig(
            variant=PRIOR_CORRECTED, seed=6, c_sigma=0.0, **FAST), cache)[0]
        drd = run_procedure(data, ProcedureConfig(
            variant=DOUBLY_ROBUST, seed=6, c_sigma=0.0, **FAST), cache)[0]
        np.testing.assert_allclose(drd.values, pc.values - drd.recenterings,
                                   atol=1e-12)

    def test_determinism(self):
        data = generate(DesignSpec("I", 50, 5, seed=14))
        cfg = ProcedureConfig(variant=DOUBLY_ROBUST, seed=7, **FAST)
        a = run_procedure(data, cfg)
        b = run_procedure(data, cfg)
        np.testing.assert_array_equal(a[0].values, b[0].values)
        assert a[1] == b[1]

    def test_cache_matches_cold_run(self):
        data = generate(DesignSpec("I", 50, 5, seed=15))
        cache = {}
        for variant in (UNCORRECTED, PRIOR_CORRECTED, DOUBLY_ROBUST):
            cfg = ProcedureConfig(variant=variant, seed=8, **FAST)
            warm = run_procedure(data, cfg, cache=cache)
            cold = run_procedure(data, cfg)
            np.testing.assert_array_equal(warm[0].values, cold[0].values)

    def test_half_split_uses_inference_half(self):
        data = generate(DesignSpec("I", 80, 5, seed=16))
        cfg = ProcedureConfig(variant=DOUBLY_ROBUST, seed=9,
                              split_mode=HALF_SPLIT, **FAST)
        _, _, diag = run_procedure(data, cfg)
        assert diag["n_pilot"] == 40
        assert diag["n_inference"] == 40
        assert diag["split_mode"] == HALF_SPLIT

    def test_mar_functional_runs(self):
        data = generate(DesignSpec("I", 60, 5, seed=17))
        cfg = ProcedureConfig(functional="MAR", variant=DOUBLY_ROBUST,
                              seed=10, **FAST)
        draws, summary, _ = run_procedure(data, cfg)
        # a mean of probabilities lives in (0, 1)
        assert 0.0 < summary.point < 1.0

    def test_mar_no_missingness_recentering_structure(self):
        """With d always 1 the MAR correction self-cancels on average."""
        g = rng(18)
        n = 60
        x = g.standard_normal((n, 1))
        y = (g.random(n) < 0.4).astype(float)
        data = Dataset(y, np.ones(n), x)
        cfg = ProcedureConfig(functional="MAR", variant=DOUBLY_ROBUST,
                              seed=11, **FAST)
        draws, _, _ = run_procedure(data, cfg)
        # gamma = 1/pi with pi clipped near 1, so recenterings nearly vanish
        assert np.max(np.abs(draws.recenterings)) < 0.01

    def _ape_data(self, seed=19, n=60):
        g = rng(seed)
        x = g.standard_normal((n, 2))
        d = (g.random(n) < 0.5).astype(float)
        y = (g.random(n) < 1 / (1 + np.exp(-x[:, 0]))).astype(float)
        return Dataset(y, d, x)

    def test_ape_functional_runs(self):
        data = self._ape_data()
        g1 = lambda q: np.exp(-0.5 * np.sum((np.atleast_2d(q) - 0.5) ** 2,
                                            axis=1)) / np.sqrt(2 * np.pi)
        g0 = lambda q: np.exp(-0.5 * np.sum(np.atleast_2d(q) ** 2,
                                            axis=1)) / np.sqrt(2 * np.pi)
        cfg = ProcedureConfig(functional="APE", variant=DOUBLY_ROBUST,
                              seed=12, ape_g1=g1, ape_g0=g0, **FAST)
        draws, summary, _ = run_procedure(data, cfg)
        assert np.isfinite(summary.point)
        assert draws.B == 40

    def test_ape_missing_densities_rejected(self):
        data = self._ape_data(seed=20)
        cfg = ProcedureConfig(functional="APE", variant=DOUBLY_ROBUST,
                              seed=12, **FAST)
        with pytest.raises(ConfigurationError):
            run_procedure(data, cfg)

    def test_ad_functional_runs(self):
        g = rng(21)
        n = 70
        x = g.standard_normal((n, 2))
        d = 0.5 * x[:, 0] + g.standard_normal(n)
        y = (g.random(n) < 1 / (1 + np.exp(-(x[:, 0] - d)))).astype(float)
        data = Dataset(y, d, x, continuous_treatment=True)
        cfg = ProcedureConfig(functional="AD", variant=DOUBLY_ROBUST,
                              seed=13, **FAST)
        draws, summary, diag = run_procedure(data, cfg)
        assert np.isfinite(summary.point)
        assert diag["ad_step"] == pytest.approx(1e-3 * np.std(d))


class TestExports:
    def test_draws_csv_roundtrip(self, tmp_path):
        data = generate(DesignSpec("I", 50, 5, seed=22))
        cfg = ProcedureConfig(variant=DOUBLY_ROBUST, seed=14, **FAST)
        draws, summary, _ = run_procedure(data, cfg)
        f = tmp_path / "draws.csv"
        dr_core.export_draws_csv(draws, f)
        body = np.loadtxt(f, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(body[:, 3], draws.values)
        np.testing.assert_array_equal(body[:, 1] - body[:, 2], body[:, 3])

    def test_summary_json(self, tmp_path):
        import json
        data = generate(DesignSpec("I", 50, 5, seed=23))
        cfg = ProcedureConfig(variant=DOUBLY_ROBUST, seed=15, **FAST)
        _, summary, _ = run_procedure(data, cfg)
        f = tmp_path / "summary.json"
        dr_core.export_summary_json(summary, f, extra={"tag": "t"})
        rec = json.loads(f.read_text())
        assert rec["point"] == summary.point
        assert rec["tag"] == "t"
