"""RKHS representation, approximants, entropy, small balls and normal bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from rescaled_gp.rkhs import (
    HigherOrderKernel,
    NoApproximantError,
    RkhsElement,
    SmallBallError,
    analytic_approximant,
    analytic_membership,
    concentration_function,
    entropy_bound,
    greedy_packing,
    holder_approximant,
    kernel_section,
    nesting_check,
    normal_quantile_checks,
    random_unit_ball,
    rkhs_evaluate,
    rkhs_norm,
    scaling_isometry_check,
    small_ball_exponent,
    sup_grid,
    unit_ball_pointwise_check,
)
from rescaled_gp.spectral import (
    DivergentQuadratureError,
    SpectralMeasure,
    covariance,
    sample_points,
)
from rescaled_gp.truths import make_truth


@pytest.fixture(scope="module")
def q1():
    return SpectralMeasure.build(1)


def _const(q, c=1.0):
    return RkhsElement(q, np.full(q.nodes.shape[0], c, dtype=complex))


class TestRepresentation:
    def test_constant_psi_is_kernel(self, q1):
        h = _const(q1)
        t = np.linspace(0, 1, 9)
        np.testing.assert_allclose(rkhs_evaluate(h, t), np.exp(-t**2), atol=1e-12)
        assert rkhs_norm(h) == pytest.approx(1.0, abs=1e-12)

    def test_zero_psi(self, q1):
        h = _const(q1, 0.0)
        assert rkhs_norm(h) == 0.0
        assert np.all(h(np.linspace(0, 1, 5)) == 0)

    def test_odd_imaginary_part_vanishes_at_zero(self, q1):
        h = RkhsElement(q1, 1j * np.sign(q1.nodes[:, 0]))
        assert abs(h(np.zeros((1, 1)))[0]) < 1e-14

    def test_homogeneity_and_triangle(self, q1):
        assert rkhs_norm(_const(q1, -2.5)) == pytest.approx(2.5, rel=1e-12)
        hs = random_unit_ball(q1, 0, n=12, radius="ball")
        for g, h in zip(hs[::2], hs[1::2]):
            assert (g + h).norm <= g.norm + h.norm + 1e-12

    def test_kernel_section_reproduces(self):
        for a in (1.0, 3.0):
            q = SpectralMeasure.build(1, a)
            s = 0.3
            h = kernel_section(q, [s])
            t = np.linspace(0, 1, 11)
            np.testing.assert_allclose(h(t), covariance(s, t[:, None], scale=a), atol=1e-10)
            assert h.sq_norm == pytest.approx(1.0, abs=1e-10)

    def test_norm_stable_under_refinement(self):
        coarse = SpectralMeasure.build(1, 2.0)
        fine = SpectralMeasure.build(1, 2.0, n_per_axis=4096, half_width=36.0)
        for s in (0.0, 0.4, 0.9):
            a, b = kernel_section(coarse, [s]), kernel_section(fine, [s])
            assert abs(a.norm - b.norm) < 1e-6

    def test_sup_grid_size(self):
        assert sup_grid(1).shape == (513, 1)
        assert sup_grid(2).shape == (65 * 65, 2)


class TestIsometry:
    def test_constant_psi(self):
        assert scaling_isometry_check(lambda lam: np.ones(len(lam)), 2.0)["residual"] < 1e-8

    def test_unit_scale_exact(self):
        r = scaling_isometry_check(lambda lam: np.cos(lam[:, 0]), 1.0)
        assert r["residual"] == 0.0

    @pytest.mark.parametrize("a", [0.5, 2.0, 5.0])
    def test_random_coefficients(self, a):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            c, s = rng.standard_normal(3), rng.uniform(-1, 1, 3)
            r = scaling_isometry_check(lambda lam: np.exp(-1j * np.outer(lam[:, 0], s)) @ c, a)
            assert r["residual"] < 1e-6
            assert r["function_residual"] < 1e-6


class TestKernel:
    def test_flat_and_support(self):
        k = HigherOrderKernel(1)
        x = np.array([0.0, 0.9, 1.0, 1.5, 2.0, 2.5])
        b = k.bump(x)
        assert b[0] == b[1] == b[2] == 1.0
        assert 0 < b[3] < 1
        assert b[4] == b[5] == 0.0
        assert k.hat(np.array([[0.3]]))[0] == pytest.approx(1 / (2 * math.pi))

    def test_moments(self):
        k = HigherOrderKernel(1)
        assert k.moment(0) == pytest.approx(1.0, abs=1e-10)
        for j in range(1, 5):
            assert abs(k.moment(j)) < 1e-8


class TestApproximants:
    def test_constant_truth(self):
        w = make_truth("band-limited")  # a stand-in with compact spectrum
        h, err = holder_approximant(w, 1.0, period=1024.0)
        assert err < 1e-10

    def test_cosine(self):
        _, err = holder_approximant(make_truth("cosine"), 16.0)
        assert err < 1e-6

    def test_rejects_small_scale(self):
        with pytest.raises(ValueError):
            holder_approximant(make_truth("cosine"), 0.5)

    def test_holder_norm_growth(self):
        # |h|^2 <= sup_{|lam| <= 2a} 1/f_a * int |w_hat|^2 = a 2 sqrt(pi) e |w|_2^2 / (2 pi)
        w = make_truth("weierstrass", alpha=0.5)
        t = np.linspace(-6, 7, 200_001)
        l2 = np.sum(w.windowed(t[:, None]) ** 2) * (t[1] - t[0])
        const = 2 * math.sqrt(math.pi) * math.e * l2 / (2 * math.pi)
        for a in (4.0, 8.0, 16.0):
            assert holder_approximant(w, a)[0].sq_norm <= const * a

    def test_membership_gaussian(self):
        w = make_truth("gaussian-bump", width=1.0, center=0.0)
        assert math.isfinite(analytic_membership(w, 3.0))
        n4, n8 = analytic_membership(w, 4.0), analytic_membership(w, 8.0)
        # closed form: (a / 2) / sqrt(1/2 - 1/(4 a^2))
        assert n4 == pytest.approx(2.0 / math.sqrt(0.5 - 1 / 64), rel=1e-8)
        assert n8 == pytest.approx(4.0 / math.sqrt(0.5 - 1 / 256), rel=1e-8)
        assert n8 / n4 <= 2.0

    def test_membership_zero(self):
        assert analytic_membership(make_truth("zero"), 4.0) == 0.0

    def test_membership_divergent_for_slow_decay(self):
        with pytest.raises(DivergentQuadratureError):
            analytic_membership(make_truth("sech"), 4.0)

    def test_sech_approximant_decay(self):
        w = make_truth("sech")
        rows = {a: analytic_approximant(w, a) for a in (4.0, 8.0, 16.0)}
        assert rows[8.0][1] < rows[4.0][1] * math.exp(-w.smoothness.gamma * 4) * 2.0
        ratios = [rows[a][0].sq_norm / a for a in rows]
        assert max(ratios) < 2 * min(ratios)


class TestNesting:
    def test_equal_scales(self, q1):
        h = random_unit_ball(q1, 0, n=1)[0]
        r = nesting_check(h, 1.0)
        assert r.sq_norm_b == pytest.approx(r.sq_norm_a, rel=1e-12)

    def test_constant_psi(self, q1):
        r = nesting_check(_const(q1), 2.0)
        assert r.sq_norm_b <= 2.0
        assert r.function_residual < 1e-12

    @pytest.mark.parametrize("a,b", [(1.0, 2.0), (1.0, 4.0), (2.0, 3.0)])
    def test_random_elements(self, a, b):
        q = SpectralMeasure.build(1, a)
        for h in random_unit_ball(q, 7, n=20):
            r = nesting_check(h, b)
            assert r.slack >= -1e-10 and r.holds

    def test_needs_larger_scale(self, q1):
        with pytest.raises(ValueError):
            nesting_check(_const(q1), 0.5)


class TestPointwise:
    def test_tau_squared(self):
        for d in (1, 2):
            assert SpectralMeasure.build(d).moment(2) == pytest.approx(2 * d, abs=1e-8)

    def test_constant_tight(self, q1):
        r = unit_ball_pointwise_check(_const(q1), [[0.5]])
        assert r.value_at_zero == pytest.approx(r.bound_at_zero)
        assert r.holds

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.sampled_from([0.1, 1.0, 10.0]), st.floats(0.0, 1.0))
    def test_random_unit_elements(self, seed, a, t):
        q = SpectralMeasure.build(1, a, n_per_axis=512)
        h = random_unit_ball(q, seed, n=1, radius="ball")[0]
        assert unit_ball_pointwise_check(h, [[t]], tau=math.sqrt(2)).holds

    def test_rejects_large_element(self, q1):
        with pytest.raises(ValueError):
            unit_ball_pointwise_check(_const(q1, 2.0), [[0.1]])


class TestEntropy:
    def test_scaling(self):
        assert entropy_bound(2.0, 0.1) / entropy_bound(1.0, 0.1) == pytest.approx(2.0)
        assert entropy_bound(1.0, 0.01) / entropy_bound(1.0, 0.1) == pytest.approx(4.0)
        assert entropy_bound(2.0, 0.1, d=2) / entropy_bound(1.0, 0.1, d=2) == pytest.approx(4.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            entropy_bound(1.0, 0.5)

    def test_greedy_packing(self):
        vals = np.array([[0.0], [0.05], [0.3], [0.31], [1.0]])
        assert greedy_packing(vals, 0.1) == 3


class TestSmallBall:
    def test_large_eps(self):
        assert small_ball_exponent(1.0, 10.0, n_paths=2000, seed=0).value == 0.0

    def test_monotone_in_a(self):
        e1 = small_ball_exponent(1.0, 0.5, n_paths=50_000, seed=1)
        e2 = small_ball_exponent(2.0, 0.5, n_paths=50_000, seed=1)
        assert e2.value >= e1.value

    def test_independent_oracle(self):
        est = small_ball_exponent(1.0, 0.5, n_paths=100_000, seed=3)
        t = np.linspace(0, 1, 257)
        paths = sample_points(t, 99, size=100_000)
        oracle = -math.log(np.mean(np.max(np.abs(paths), axis=1) <= 0.5))
        assert est.value == pytest.approx(oracle, rel=0.10)
        assert est.converged

    def test_zero_successes(self):
        with pytest.raises(SmallBallError) as info:
            small_ball_exponent(8.0, 0.02, n_paths=500, seed=0, max_paths=500)
        assert info.value.lower_bound > 0

    def test_concentration_of_zero_truth(self):
        r = concentration_function(make_truth("zero"), 2.0, 0.5, n_paths=20_000, seed=5)
        sb = small_ball_exponent(2.0, 0.5, n_paths=20_000, seed=5)
        assert r.decentering == 0.0
        assert r.value == pytest.approx(sb.value)

    def test_no_approximant(self):
        with pytest.raises(NoApproximantError):
            concentration_function(make_truth("weierstrass", alpha=0.5), 2.0, 0.1, n_paths=100)


class TestNormalQuantiles:
    def test_examples(self):
        q = special.ndtri(0.1)
        assert q == pytest.approx(-1.2816, abs=1e-4)
        assert -math.sqrt(2 * math.log(10)) <= q <= -0.5 * math.sqrt(math.log(10))
        assert special.ndtr(-1) <= math.exp(-0.5)
        assert special.ndtr(2 + special.ndtri(math.exp(-2))) >= 0.5

    def test_dense_grids(self):
        res = normal_quantile_checks(x=np.linspace(-40, 40, 8001),
                                     u=np.logspace(-300, -1e-9, 8001))
        assert set(res) == {"cdf_tail", "shifted_quantile", "quantile_lower", "quantile_upper"}
        assert all(np.all(v) for v in res.values())

    @given(st.floats(1e-300, 0.2499))
    def test_quantile_sandwich(self, u):
        r = normal_quantile_checks(u=[u])
        assert r["quantile_lower"][0] and r["quantile_upper"][0]
