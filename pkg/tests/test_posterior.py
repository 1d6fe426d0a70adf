"""Likelihoods, priors, sampler updates, chains and posterior functionals."""

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from rescaled_gp.bandwidth import GammaRootPrior
from rescaled_gp.posterior import (
    Chain,
    ChainConfig,
    Classification,
    Dataset,
    Density,
    Model,
    Regression,
    conjugate_oracle,
    contraction_mass,
    empirical_norm,
    hellinger,
    initial_state,
    l2g_norm,
    link,
    log_likelihood,
    log_normalizer,
    log_prior,
    posterior_functional,
    quadrature_grid,
    run_chain,
    sample_distances,
    update_bandwidth,
    update_sigma,
    update_weights,
)
from rescaled_gp.spectral import GridSpec


def _state(M=8, seed=0, setting=Regression(), **kw):
    return initial_state(M, seed, GammaRootPrior(d=1), setting, **kw)


def _random_state(M=16, seed=0, sigma=None):
    st = _state(M, seed)
    w = np.random.default_rng(seed).standard_normal(2 * M)
    return st.with_(weights=w, sigma=sigma)


def _batch_se(x, n_batches=40):
    b = np.array_split(np.asarray(x), n_batches)
    means = np.array([v.mean(axis=0) for v in b])
    return means.std(axis=0, ddof=1) / math.sqrt(n_batches)


class TestSettingsAndData:
    def test_sigma_interval(self):
        with pytest.raises(ValueError):
            Regression(1.0, 0.5)

    def test_unknown_link(self):
        with pytest.raises(ValueError):
            Classification(link="cauchit")
        with pytest.raises(ValueError):
            link(0.0, "cauchit")

    def test_links(self):
        assert link(0.0) == 0.5 and link(0.0, "probit") == 0.5
        np.testing.assert_allclose(link([-2.0, 3.0]), special.expit([-2.0, 3.0]))

    def test_covariates_in_cube(self):
        with pytest.raises(ValueError):
            Dataset(np.array([0.5, 1.2]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros(3), np.zeros(2))

    def test_labels_checked(self):
        st = _state(setting=Classification())
        with pytest.raises(ValueError, match="0 or 1"):
            log_likelihood(st, Dataset(np.array([0.2]), np.array([2.0])), Classification())

    def test_responses_required(self):
        with pytest.raises(ValueError):
            log_likelihood(_state(), Dataset(np.array([0.2])), Regression())


class TestLikelihood:
    def test_regression_single_point(self):
        st = _state(sigma_init=1.0)
        ll = log_likelihood(st, Dataset(np.array([0.3]), np.array([0.0])), Regression())
        assert ll == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-14)
        assert ll == pytest.approx(-0.9189385332)

    def test_classification_flat(self):
        data = Dataset(np.linspace(0, 1, 7), np.array([0, 1, 1, 0, 1, 0, 0.0]))
        for name in ("logistic", "probit"):
            ll = log_likelihood(_state(setting=Classification(name)), data, Classification(name))
            assert ll == pytest.approx(7 * math.log(0.5), rel=1e-14)

    def test_density_constant(self):
        ll = log_likelihood(_state(setting=Density()), Dataset(np.linspace(0, 1, 9)), Density())
        assert ll == pytest.approx(0.0, abs=1e-13)

    def test_empty_data(self):
        assert log_likelihood(_random_state(), Dataset.empty(1, responses=False), Density()) == 0.0

    def test_regression_matches_scipy(self):
        st = _random_state(sigma=0.4)
        x = np.linspace(0, 1, 25)
        y = np.cos(3 * x)
        expected = stats.norm(st(x), 0.4).logpdf(y).sum()
        assert log_likelihood(st, Dataset(x, y), Regression()) == pytest.approx(expected, rel=1e-12)

    def test_classification_matches_direct(self):
        st = _random_state()
        x = np.linspace(0, 1, 30)
        y = (np.arange(30) % 3 == 0).astype(float)
        for name in ("logistic", "probit"):
            p = link(st(x), name)
            expected = np.sum(y * np.log(p) + (1 - y) * np.log1p(-p))
            got = log_likelihood(st, Dataset(x, y), Classification(name))
            assert got == pytest.approx(expected, rel=1e-10)

    def test_density_matches_quadrature(self):
        st = _random_state(M=8, seed=3)
        x = np.array([0.1, 0.4, 0.8])
        z, _ = integrate.quad(lambda t: math.exp(st(np.array([t]))[0]), 0, 1, epsabs=1e-13)
        expected = st(x).sum() - 3 * math.log(z)
        # the normaliser uses the 513-node trapezoid rule, O(h^2) ~ 1e-5
        assert log_likelihood(st, Dataset(x), Density()) == pytest.approx(expected, abs=5e-5)

    def test_density_shift_invariance(self):
        # a constant shift of w leaves the normalised density unchanged
        st = _random_state(M=8, seed=4)
        data = Dataset(np.array([0.2, 0.6]))
        M = st.n_features
        shift = np.zeros(2 * M)
        shifted = st.with_(frequencies=np.vstack([st.frequencies[:-1], [[0.0]]]))
        shift[M - 1] = 2.0 * math.sqrt(M)
        a = log_likelihood(shifted, data, Density())
        b = log_likelihood(shifted.with_(weights=shifted.weights + shift), data, Density())
        assert a == pytest.approx(b, abs=1e-10)

    @pytest.mark.parametrize("setting", [Regression(), Classification(), Density()])
    def test_self_generated_data_preferred(self, setting):
        rng = np.random.default_rng(0)
        grid = GridSpec.dyadic(12)
        wins = 0
        for rep in range(20):
            st = _random_state(M=16, seed=100 + rep, sigma=0.5)
            other = st.with_(weights=st.weights + 0.5 * rng.standard_normal(st.weights.size))
            n = 2000
            if isinstance(setting, Density):
                p = np.exp(st(grid.points()))
                x = rng.choice(grid.points()[:, 0], size=n, p=p / p.sum())
                data = Dataset(x)
            else:
                x = rng.uniform(size=n)
                w = st(x)
                y = (w + 0.5 * rng.standard_normal(n) if isinstance(setting, Regression)
                     else (rng.uniform(size=n) < link(w)).astype(float))
                data = Dataset(x, y)
            wins += log_likelihood(st, data, setting) > log_likelihood(other, data, setting)
        assert wins == 20


class TestLogNormalizer:
    def test_matches_direct(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = rng.uniform(-30, 30, 50)
            w = rng.uniform(0.01, 1, 50)
            direct = math.log(np.sum(w * np.exp(v)))
            assert abs(log_normalizer(v, w) - direct) < 1e-10

    def test_no_overflow(self):
        v = np.array([1000.0, 1000.0])
        assert log_normalizer(v, np.array([0.5, 0.5])) == pytest.approx(1000.0)

    def test_quadrature_grid_sizes(self):
        assert quadrature_grid(1).size == 513
        assert quadrature_grid(2).size == 65 * 65


class TestLogPrior:
    def test_example(self):
        M = 8
        st = _state(M, setting=Density(), a_init=1.0)
        expected = -M * math.log(2 * math.pi) - 1.0
        assert log_prior(st, GammaRootPrior(d=1), Density()) == pytest.approx(expected, rel=1e-14)

    def test_weight_term_doubles_with_m(self):
        prior = GammaRootPrior(d=1)
        lp = [log_prior(_state(M, setting=Density(), a_init=1.0), prior, Density()) + 1.0
              for M in (8, 16)]
        assert lp[1] == pytest.approx(2 * lp[0])

    def test_sigma_outside_interval(self):
        s = Regression(0.1, 2.0)
        st = _state(setting=s, sigma_init=2.1)
        assert log_prior(st, GammaRootPrior(d=1), s) == -math.inf
        inside = log_prior(st.with_(sigma=1.0), GammaRootPrior(d=1), s)
        assert math.isfinite(inside)


class TestInitialState:
    def test_defaults(self):
        s = Regression(0.1, 2.0)
        st = initial_state(16, 0, GammaRootPrior(d=1), s)
        assert st.scale == pytest.approx(math.log(2.0))
        assert st.sigma == pytest.approx(1.05)
        assert np.all(st.weights == 0) and st.weights.shape == (32,)

    def test_hermite_amplitudes(self):
        st = initial_state(8, 0, GammaRootPrior(d=1), Density(), design="hermite")
        assert np.sum(st.coefficients**2) == pytest.approx(1.0)

    def test_unknown_design(self):
        with pytest.raises(ValueError):
            initial_state(8, 0, GammaRootPrior(d=1), Density(), design="sobol")

    def test_features_evaluate_function(self):
        st = _random_state()
        t = np.linspace(0, 1, 5)
        np.testing.assert_allclose(st.features(t) @ st.weights, st(t))


class TestUpdates:
    def test_weights_deterministic(self):
        data = Dataset(np.linspace(0, 1, 10), np.sin(np.linspace(0, 3, 10)))
        st = _state(sigma_init=0.5)
        for method in ("ess", "gibbs"):
            a = update_weights(st, data, Regression(), 5, method)
            b = update_weights(st, data, Regression(), 5, method)
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_gibbs_needs_regression(self):
        with pytest.raises(ValueError):
            update_weights(_state(setting=Density()), Dataset(np.array([0.5])), Density(), 0,
                           "gibbs")

    def test_unknown_weight_move(self):
        with pytest.raises(ValueError):
            update_weights(_state(setting=Density()), Dataset(np.array([0.5])), Density(), 0,
                           "hmc")

    def test_weights_prior_invariance(self):
        st = _state(4, setting=Density())
        data = Dataset.empty(1, responses=False)
        model = Model(data, Density(), GammaRootPrior(d=1), st)
        rng = np.random.default_rng(0)
        draws = []
        for _ in range(10_000):
            st = update_weights(st, data, Density(), rng, model=model)
            draws.append(st.weights)
        draws = np.array(draws)
        assert np.all(np.abs(draws.mean(axis=0)) < 0.05)
        assert np.all(np.abs(draws.var(axis=0) - 1) < 0.05)

    def test_bandwidth_step_zero(self):
        st = _random_state(sigma=0.5)
        data = Dataset(np.linspace(0, 1, 5), np.zeros(5))
        new, ok = update_bandwidth(st, data, Regression(), GammaRootPrior(d=1), 0, step=0.0)
        assert new is st and ok

    def test_bandwidth_unknown_move(self):
        st = _random_state(sigma=0.5)
        with pytest.raises(ValueError):
            update_bandwidth(st, Dataset(np.array([0.5]), np.zeros(1)), Regression(),
                             GammaRootPrior(d=1), 0, method="slice")

    @pytest.mark.parametrize("method", ["joint", "fixed"])
    def test_bandwidth_deterministic(self, method):
        st = _random_state(sigma=0.5)
        data = Dataset(np.linspace(0, 1, 5), np.ones(5))
        a = update_bandwidth(st, data, Regression(), GammaRootPrior(d=1), 3, method=method)
        b = update_bandwidth(st, data, Regression(), GammaRootPrior(d=1), 3, method=method)
        assert a[0].ell == b[0].ell and a[1] == b[1]

    def test_sigma_outside_always_rejected(self):
        s = Regression(0.1, 0.2)
        st = _random_state(sigma=0.15)
        data = Dataset(np.linspace(0, 1, 5), np.zeros(5))
        rng = np.random.default_rng(0)
        moved = 0
        for _ in range(200):
            new, ok = update_sigma(st, data, s, rng, step=100.0)
            moved += ok
            assert s.sigma_lo <= new.sigma <= s.sigma_hi
        assert moved <= 2

    def test_sigma_needs_regression(self):
        with pytest.raises(ValueError):
            update_sigma(_state(setting=Density()), Dataset(np.array([0.5])), Density(), 0)

    def test_sigma_posterior_linear_truth(self):
        # marginal posterior of sigma with A clamped, by quadrature over sigma
        rng = np.random.default_rng(4)
        n, sigma0, a = 200, 0.3, 1.0
        x = np.linspace(0, 1, n)
        data = Dataset(x, 0.5 + x + sigma0 * rng.standard_normal(n))
        s = Regression(0.1, 1.0)
        cfg = ChainConfig(n_features=32, burn_in=200, n_iter=4000, thin=1, seed=9,
                          weight_move="gibbs", frequency_design="hermite", a_init=a,
                          clamp_bandwidth=True)
        chain = run_chain(cfg, data, s)
        grid = np.linspace(s.sigma_lo, s.sigma_hi, 2001)
        K = np.exp(-(a * (x[:, None] - x[None, :])) ** 2)
        logp = np.array([stats.multivariate_normal(np.zeros(n), K + g**2 * np.eye(n),
                                                   allow_singular=True).logpdf(data.y)
                         for g in grid])
        p = np.exp(logp - logp.max())
        oracle = np.sum(grid * p) / np.sum(p)
        se = _batch_se(chain.sigma)
        assert abs(chain.sigma.mean() - oracle) < 3 * se
        assert abs(oracle - sigma0) < 0.05


class TestChain:
    def test_zero_length(self):
        cfg = ChainConfig(n_features=8, burn_in=0, n_iter=0, seed=1)
        chain = run_chain(cfg, Dataset(np.array([0.5]), np.array([1.0])), Regression())
        assert len(chain) == 1
        assert np.all(chain.weights == 0)
        assert chain.ell[0] == pytest.approx(math.log(math.log(2.0)))

    def test_bit_reproducible(self):
        data = Dataset(np.linspace(0, 1, 20), (np.arange(20) % 2).astype(float))
        cfg = ChainConfig(n_features=8, burn_in=10, n_iter=20, thin=2, seed=[3, 1])
        a = run_chain(cfg, data, Classification())
        b = run_chain(cfg, data, Classification())
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.ell, b.ell)
        np.testing.assert_array_equal(a.log_post, b.log_post)

    def test_thinning_count(self):
        cfg = ChainConfig(n_features=4, burn_in=3, n_iter=10, thin=3, seed=0)
        chain = run_chain(cfg, Dataset.empty(1, responses=False), Density())
        assert len(chain) == 3 and chain.diagnostics["n_samples"] == 3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ChainConfig(thin=0)
        with pytest.raises(ValueError):
            ChainConfig(weight_move="hmc")
        with pytest.raises(ValueError):
            ChainConfig(bandwidth_move="slice")

    def test_gibbs_outside_regression(self):
        cfg = ChainConfig(n_features=4, burn_in=1, n_iter=1, weight_move="gibbs")
        with pytest.raises(ValueError):
            run_chain(cfg, Dataset(np.array([0.5])), Density())

    def test_acceptance_in_band(self):
        x = np.linspace(0, 1, 50)
        data = Dataset(x, np.sin(4 * x) + 0.3 * np.random.default_rng(0).standard_normal(50))
        cfg = ChainConfig(n_features=32, burn_in=300, n_iter=600, thin=2, seed=0,
                          weight_move="gibbs")
        d = run_chain(cfg, data, Regression()).diagnostics
        assert 0.15 <= d["acceptance_bandwidth"] <= 0.5
        assert 0.15 <= d["acceptance_sigma"] <= 0.5

    def test_ess_matches_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(8, 1))
        data = Dataset(x, np.cos(3 * x[:, 0]) + 0.3 * rng.standard_normal(8))
        cfg = ChainConfig(n_features=32, burn_in=500, n_iter=20_000, thin=1, seed=1,
                          frequency_design="hermite", a_init=1.5, sigma_init=0.3,
                          clamp_bandwidth=True, clamp_sigma=True)
        vals = run_chain(cfg, data, Regression()).values(x)
        mean, cov = conjugate_oracle(data, 1.5, 0.3)
        assert np.all(np.abs(vals.mean(0) - mean) < 3 * _batch_se(vals))
        np.testing.assert_allclose(vals.var(0), np.diag(cov), rtol=0.15)


def _constant_chain(w, S=5, M=4):
    st = initial_state(M, 0, GammaRootPrior(d=1), Density())
    return Chain(st.frequencies, st.amplitudes, np.tile(w, (S, 1)), np.zeros(S), None,
                 np.zeros(S))


class TestFunctionals:
    def test_identical_states_zero_width(self):
        w = np.random.default_rng(0).standard_normal(8)
        grid = GridSpec.uniform(33)
        mean, lo, hi = posterior_functional(_constant_chain(w), grid, Regression())
        np.testing.assert_allclose(lo, mean, atol=1e-12)
        np.testing.assert_allclose(hi, mean, atol=1e-12)

    def test_density_mean_integrates_to_one(self):
        rng = np.random.default_rng(1)
        st = initial_state(8, 0, GammaRootPrior(d=1), Density())
        chain = Chain(st.frequencies, None, rng.standard_normal((10, 16)),
                      rng.normal(0, 0.5, 10), None, np.zeros(10))
        grid = quadrature_grid(1)
        mean, _, _ = posterior_functional(chain, grid, Density())
        assert np.sum(grid.trapezoid_weights() * mean) == pytest.approx(1.0, abs=1e-6)

    def test_density_needs_grid(self):
        from rescaled_gp.posterior import _transform
        with pytest.raises(ValueError):
            _transform(np.zeros((1, 3)), Density(), None)

    def test_classification_in_unit_interval(self):
        w = 5 * np.random.default_rng(2).standard_normal(8)
        mean, lo, hi = posterior_functional(_constant_chain(w), GridSpec.uniform(17),
                                            Classification())
        assert np.all((lo > 0) & (hi < 1))


class TestDistances:
    def test_hellinger_example(self):
        g = GridSpec.dyadic(12)
        t = g.points()[:, 0]
        assert hellinger(np.ones_like(t), 2 * t, g) == pytest.approx(
            math.sqrt(2 - 4 * math.sqrt(2) / 3), abs=1e-5)
        assert hellinger(np.ones_like(t), 2 * t, g) == pytest.approx(0.3382, abs=1e-4)

    def test_hellinger_basic(self):
        g = GridSpec.dyadic(9)
        t = g.points()[:, 0]
        f, h = np.ones_like(t), 2 * t
        assert hellinger(f, f, g) == 0.0
        assert hellinger(f, h, g) == hellinger(h, f, g)
        with pytest.raises(ValueError):
            hellinger(-f, f, g)

    def test_empirical_norm(self):
        t = np.array([0.0, 0.5, 1.0])
        assert empirical_norm(t) == pytest.approx(math.sqrt(5 / 12))
        assert empirical_norm(np.zeros(4)) == 0.0
        assert empirical_norm(-3 * t) == pytest.approx(3 * empirical_norm(t))
        with pytest.raises(ValueError):
            empirical_norm(np.zeros(0))

    def test_l2g(self):
        ident = lambda p: p[:, 0]
        zero = lambda p: np.zeros(p.shape[0])
        assert l2g_norm(ident, zero) == pytest.approx(1 / math.sqrt(3), abs=1e-6)
        assert l2g_norm(ident, ident) == 0.0
        assert l2g_norm(lambda p: zero(p) + 0.7, zero) == pytest.approx(0.7)

    def test_l2g_density_and_empirical(self):
        ident = lambda p: p[:, 0]
        zero = lambda p: np.zeros(p.shape[0])
        # G(t) = 2t: int t^2 2t dt = 1/2
        assert l2g_norm(ident, zero, G=lambda p: 2 * p[:, 0]) == pytest.approx(
            math.sqrt(0.5), abs=1e-5)
        pts = np.array([[0.0], [1.0]])
        assert l2g_norm(ident, zero, G=pts) == pytest.approx(math.sqrt(0.5))

    def test_contraction_mass_limits(self):
        rng = np.random.default_rng(3)
        st = initial_state(8, 0, GammaRootPrior(d=1), Density())
        chain = Chain(st.frequencies, None, rng.standard_normal((20, 16)), np.zeros(20), None,
                      np.zeros(20))
        truth = lambda p: np.zeros(p.shape[0])
        for setting in (Density(), Classification()):
            assert contraction_mass(chain, truth, 0.0, setting) == 1.0
            assert contraction_mass(chain, truth, math.inf, setting) == 0.0
            masses = [contraction_mass(chain, truth, r, setting) for r in np.linspace(0, 1, 11)]
            assert np.all(np.diff(masses) <= 0)

    def test_regression_distance_adds_sigma(self):
        st = initial_state(4, 0, GammaRootPrior(d=1), Regression())
        chain = Chain(st.frequencies, None, np.zeros((2, 8)), np.zeros(2), np.array([0.5, 1.0]),
                      np.zeros(2))
        data = Dataset(np.array([0.0, 0.5, 1.0]), np.zeros(3))
        truth = lambda p: p[:, 0]
        d = sample_distances(chain, truth, Regression(), data, sigma0=0.5)
        np.testing.assert_allclose(d, math.sqrt(5 / 12) + np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            sample_distances(chain, truth, Regression())


class TestConjugateOracle:
    def test_scalar_example(self):
        data = Dataset(np.array([0.5]), np.array([1.0]))
        mean, cov = conjugate_oracle(data, 1.0, 1.0)
        assert mean[0] == pytest.approx(0.5)
        assert cov[0, 0] == pytest.approx(0.5)

    def test_large_noise_gives_prior(self):
        data = Dataset(np.linspace(0, 1, 5), np.ones(5))
        mean, cov = conjugate_oracle(data, 2.0, 1e4)
        assert np.max(np.abs(mean)) < 1e-6
        np.testing.assert_allclose(np.diag(cov), 1.0, atol=1e-6)

    def test_off_design_points(self):
        data = Dataset(np.array([0.2, 0.8]), np.array([1.0, -1.0]))
        mean, cov = conjugate_oracle(data, 1.0, 0.5, points=[[0.5]])
        assert mean.shape == (1,) and cov.shape == (1, 1)
        assert abs(mean[0]) < 1e-12
