"""Rate formulas, data simulation, cells, slope fits and experiment reports."""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from rescaled_gp.experiments import (
    AdaptationReport,
    CellResult,
    ExperimentConfig,
    RateReport,
    _cell_seeds,
    fit_slope,
    make_config_truth,
    make_prior,
    make_setting,
    rate_experiment,
    run_cell,
    simulate_data,
    theoretical_rate,
    truth_seed_name,
)
from rescaled_gp.bandwidth import EnvelopePrior, GammaRootPrior
from rescaled_gp.posterior import Classification, Density, Regression, link
from rescaled_gp.truths import Analytic, Holder, make_truth

TINY_CHAIN = {"n_features": 16, "burn_in": 20, "n_iter": 40, "thin": 2,
              "weight_move": "gibbs"}


def _tiny(**kw):
    base = dict(setting="regression", n_grid=(16, 32, 64, 128), replicates=2,
                chain=TINY_CHAIN, seed=5, name="tiny")
    base.update(kw)
    return ExperimentConfig(**base)


class TestTheoreticalRate:
    def test_holder_one(self):
        r = theoretical_rate(Holder(1.0))
        assert r.exponent == pytest.approx(1 / 3)
        assert r.log_power == pytest.approx(5 / 6)
        assert (r.kappa1, r.kappa2) == (pytest.approx(2 / 3), pytest.approx(1.0))

    def test_holder_two(self):
        r = theoretical_rate(Holder(2.0))
        assert r.exponent == pytest.approx(2 / 5)
        assert r.log_power == pytest.approx(9 / 10)

    def test_headline_power_closed_form(self):
        for a in (0.3, 1.0, 2.5, 7.0):
            for d in (1, 2, 3):
                r = theoretical_rate(Holder(a), d=d)
                assert r.log_power == pytest.approx((4 * a + d) / (4 * a + 2 * d))

    def test_eps_powers(self):
        r = theoretical_rate(Holder(1.0))
        assert r.eps_log_power == r.kappa1
        assert r.eps_bar_log_power == pytest.approx(r.kappa1 + r.kappa2)

    def test_analytic(self):
        r = theoretical_rate(Analytic(1.0, 2.0))
        assert (r.exponent, r.log_power) == (0.5, pytest.approx(2.0))
        r1 = theoretical_rate(Analytic(1.0, 1.0))
        assert r1.kappa1 == pytest.approx(1.5) and r1.log_power == pytest.approx(2.5)
        assert theoretical_rate(Analytic(1.0, 2.0), d=2).log_power == pytest.approx(3.0)

    def test_continuous_in_alpha(self):
        a = np.linspace(0.5, 3.0, 201)
        e = np.array([theoretical_rate(Holder(x)).exponent for x in a])
        p = np.array([theoretical_rate(Holder(x)).log_power for x in a])
        assert np.max(np.abs(np.diff(e))) < 0.01 and np.max(np.abs(np.diff(p))) < 0.01
        assert np.all(np.diff(e) > 0)
        assert e[-1] < 0.5

    def test_envelope_q(self):
        r = theoretical_rate(Holder(1.0), q=3.0)
        assert r.kappa1 == pytest.approx(1.0) and r.kappa2 == pytest.approx(-0.5)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            theoretical_rate(Holder(0.0))
        with pytest.raises(ValueError):
            theoretical_rate("smooth")


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.n_grid == (100, 400, 1600, 6400)
        assert isinstance(make_setting(c), Regression)
        assert isinstance(make_prior(c), GammaRootPrior)

    def test_round_trip(self):
        c = _tiny(expect={"slope_max": -0.1})
        assert ExperimentConfig(**c.to_dict()) == c

    @pytest.mark.parametrize("kw", [
        {"n_grid": (10, 20, 30)},
        {"n_grid": (10, 20, 20, 40)},
        {"replicates": 0},
        {"setting": "survival"},
        {"truth": {"alpha": 1.0}},
        {"chain": {"n_feature": 4}},
        {"expect": {"slope_min": -1}},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            _tiny(**kw)

    def test_prior_choice(self):
        assert isinstance(make_prior(_tiny(prior={"p": 1.0, "q": 2.0})), EnvelopePrior)
        with pytest.raises(ValueError):
            make_prior(_tiny(prior={"shape": 1.0, "scale": 2.0}))

    def test_settings(self):
        assert isinstance(make_setting(_tiny(setting="density")), Density)
        s = make_setting(_tiny(setting="classification", link="probit"))
        assert isinstance(s, Classification) and s.link == "probit"

    def test_with_truth(self):
        c = _tiny().with_truth({"id": "cosine"}, "cos")
        assert c.name == "cos" and make_config_truth(c)(np.array([[0.0]]))[0] == 1.0

    def test_truth_tag_stable(self):
        a = truth_seed_name({"id": "cosine", "k": 1})
        assert a == truth_seed_name({"k": 1, "id": "cosine"})
        assert a != truth_seed_name({"id": "cosine", "k": 2})


class TestSimulateData:
    def test_density_ks(self):
        w = make_truth("gaussian-bump", width=0.3)
        data = simulate_data(w, Density(), 100_000, 0)
        z, _ = integrate.quad(lambda t: math.exp(w(np.array([t]))[0]), 0, 1)
        grid = np.linspace(0, 1, 4001)
        dens = np.exp(w(grid)) / z
        cdf = np.concatenate([[0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        assert stats.kstest(data.x[:, 0], lambda t: np.interp(t, grid, cdf)).statistic < 0.02

    def test_regression_noiseless(self):
        w = make_truth("cosine")
        data = simulate_data(w, Regression(), 8, 0, sigma0=0.0)
        np.testing.assert_allclose(data.x[:, 0], (np.arange(8) + 0.5) / 8)
        np.testing.assert_array_equal(data.y, w(data.x))

    def test_regression_noise_level(self):
        w = make_truth("zero")
        data = simulate_data(w, Regression(), 50_000, 1, sigma0=0.5)
        assert data.y.std() == pytest.approx(0.5, rel=0.02)

    def test_two_dimensional_design(self):
        data = simulate_data(make_truth("zero", d=2), Regression(), 16, 0)
        assert data.x.shape == (16, 2)
        with pytest.raises(ValueError, match="perfect power"):
            simulate_data(make_truth("zero", d=2), Regression(), 15, 0)

    def test_label_frequency(self):
        w = make_truth("cosine")
        data = simulate_data(w, Classification(), 100_000, 2)
        t = np.linspace(0, 1, 10001)
        expected = np.mean(link(w(t)))
        assert data.y.mean() == pytest.approx(expected, abs=0.01)
        assert set(np.unique(data.y)) == {0.0, 1.0}

    def test_deterministic(self):
        w = make_truth("cosine")
        a, b = (simulate_data(w, Density(), 100, 3) for _ in range(2))
        np.testing.assert_array_equal(a.x, b.x)


class TestCells:
    def test_seeds_separate(self):
        seeds = {_cell_seeds(0, n, r)[1] for n in (10, 20) for r in range(3)}
        assert len(seeds) == 6
        assert _cell_seeds(0, 10, 0)[1] == _cell_seeds(0, 10, 0)[1]

    def test_cell_reproducible(self):
        c = _tiny()
        assert run_cell(c, 32, 1) == run_cell(c, 32, 1)

    @pytest.mark.parametrize("setting", ["density", "classification"])
    def test_other_settings(self, setting):
        c = _tiny(setting=setting, truth={"id": "cosine"},
                  chain={**TINY_CHAIN, "weight_move": "ess"})
        r = run_cell(c, 32, 0)
        assert 0 < r.risk < 1.5 and not math.isnan(r.acceptance_bandwidth)
        assert math.isnan(r.acceptance_sigma)


class TestSlope:
    def test_exact_power_law(self):
        n = np.array([100, 400, 1600, 6400])
        slope, se, icpt = fit_slope(n, 3.0 * n ** -0.4)
        assert slope == pytest.approx(-0.4) and se == pytest.approx(0.0, abs=1e-12)
        assert icpt == pytest.approx(math.log(3.0))


@pytest.fixture(scope="module")
def report():
    return rate_experiment(_tiny(expect={"slope_max": 5.0, "spearman_max": 1.0}))


class TestRateExperiment:
    def test_shape(self, report):
        assert len(report.cells) == 8
        assert len(report.cell_rows()) == 8
        assert len(report.cell_rows()[0]) == len(RateReport.CELL_COLUMNS)
        assert len(report.summary_row()) == len(RateReport.SUMMARY_COLUMNS)
        assert report.passed

    def test_order_independent(self, report):
        cfg = report.config
        cells = [(n, r) for n in cfg.n_grid for r in range(cfg.replicates)]
        rev = rate_experiment(cfg, cells=cells[::-1])
        assert sorted(rev.cells, key=lambda c: (c.n, c.replicate)) == report.cells
        assert rev.slope == pytest.approx(report.slope, rel=1e-12)

    def test_truth_swap_keeps_results(self, report):
        other = report.config.with_truth({"id": "cosine"}, "other")
        rate_experiment(other, cells=[(16, 0)])
        again = rate_experiment(report.config)
        assert again.cells == report.cells

    def test_failing_expectation(self):
        rep = rate_experiment(_tiny(replicates=1, expect={"slope_band": [-10.0, -9.0]}))
        assert rep.checks == {"slope_band": False} and not rep.passed

    def test_flagged_cells_excluded(self, monkeypatch):
        import rescaled_gp.experiments as ex

        def fake(config, n, rep):
            return CellResult(n, rep, 1.0 / n, 0.0, 1.0, 0.3 if n > 16 else 0.0, 0.3, n == 16)

        monkeypatch.setattr(ex, "run_cell", fake)
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            rep = ex.rate_experiment(_tiny())
        assert any("flagged" in str(x.message) for x in w)
        assert rep.slope == pytest.approx(-1.0)

    def test_nonfinite_risk_raises(self, monkeypatch):
        import rescaled_gp.experiments as ex
        monkeypatch.setattr(ex, "run_cell",
                            lambda c, n, r: CellResult(n, r, math.nan, 0, 1, 0.3, 0.3, False))
        with pytest.raises(FloatingPointError):
            ex.rate_experiment(_tiny())


class TestAdaptationReport:
    def _report(self, slope, bw):
        cells = [CellResult(128, 0, 0.1, 0.1, bw, 0.3, 0.3, False)]
        return RateReport(_tiny(), cells, slope, 0.01, 0.0, theoretical_rate(Holder(1.0)), -1.0)

    def test_ordering(self):
        rough, smooth = self._report(-0.3, 8.0), self._report(-0.45, 2.0)
        rep = AdaptationReport(rough, smooth, 0.15, 0.05)
        assert rep.slope_ordered and rep.bandwidth_ordered
        assert len(rep.summary_row()) == len(AdaptationReport.SUMMARY_COLUMNS)

    def test_gap_too_small(self):
        rough, smooth = self._report(-0.3, 1.0), self._report(-0.33, 2.0)
        rep = AdaptationReport(rough, smooth, 0.03, 0.05)
        assert not rep.slope_ordered and not rep.bandwidth_ordered
