"""Numerical checks of the analytic machinery, grouped for the ``verify`` command.

Each group returns a list of :class:`Check` rows with an observed value, the
bound it is compared with and a pass flag.  Groups:

``spectral``       covariance vs spectral quadrature
``rkhs``           scaling isometry, nesting, unit-ball pointwise bounds,
                   bandwidth tails, normal quantile inequalities
``approximation``  convolution approximants and analytic membership
``entropy``        greedy packing vs the calibrated entropy bound
``small-ball``     small-ball growth order and the shifted-ball inequality
``sampler``        prior invariance with no data and the conjugate regression oracle
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .bandwidth import EnvelopePrior, GammaRootPrior, tail_bound
from .posterior import ChainConfig, Dataset, Regression, conjugate_oracle, run_chain
from .rkhs import (
    RkhsElement,
    analytic_approximant,
    analytic_membership,
    entropy_bound,
    greedy_packing,
    holder_approximant,
    nesting_check,
    normal_quantile_checks,
    random_unit_ball,
    scaling_isometry_check,
    shifted_ball_check,
    small_ball_exponent,
    unit_ball_pointwise_check,
)
from .spectral import GridSpec, SpectralMeasure, verify_bochner
from .truths import make_truth

__all__ = ["Check", "GROUPS", "COLUMNS", "run_suite", "check_rows"] + [
    f"{g}_checks" for g in ("bochner", "isometry", "nesting", "pointwise", "tail",
                             "quantile", "approximation", "entropy", "small_ball",
                             "prior_invariance", "conjugate")]

COLUMNS = ("check_id", "lemma", "parameters", "observed", "bound", "pass")


@dataclass(frozen=True)
class Check:
    check_id: str
    lemma: str
    parameters: str
    observed: float
    bound: float
    passed: bool

    def row(self) -> tuple:
        return (self.check_id, self.lemma, self.parameters, self.observed, self.bound,
                int(self.passed))


def _params(**kw) -> str:
    return ";".join(f"{k}={v}" for k, v in kw.items())


# ---------------------------------------------------------------------------
# spectral


def bochner_checks(seed=0, n_points: int = 50, dims: Sequence[int] = (1, 2)) -> list:
    """Max residual of covariance vs spectral quadrature at random points in [-2, 2]^d."""
    out = []
    rng = np.random.default_rng([int(seed), 1])
    for d in dims:
        q = SpectralMeasure.build(d)
        pts = rng.uniform(-2.0, 2.0, size=(n_points, d))
        res = max(verify_bochner(t, q) for t in pts)
        out.append(Check(f"bochner-d{d}", "bochner", _params(d=d, points=n_points), res,
                         1e-6, res < 1e-6))
    return out


# ---------------------------------------------------------------------------
# RKHS structure


def _random_psi(rng) -> Callable:
    """Mixture of kernel sections and a Gaussian bump in frequency."""
    m = int(rng.integers(1, 5))
    centres = rng.uniform(-1.0, 1.0, size=m)
    c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    shift, width = rng.standard_normal(), rng.uniform(0.3, 2.0)
    g = complex(rng.standard_normal(), rng.standard_normal())

    def psi(lam):
        lam = lam[:, 0]
        return (np.exp(-1j * np.outer(lam, centres)) @ c
                + g * np.exp(-((lam - shift) ** 2) / (2 * width**2)))

    return psi


def isometry_checks(seed=0, n_psi: int = 10, scales: Sequence[float] = (0.5, 2.0, 5.0)) -> list:
    out = []
    q1 = SpectralMeasure.build(1)
    r = scaling_isometry_check(lambda lam: np.ones(lam.shape[0]), 2.0, quadrature=q1)
    out.append(Check("isometry-const-a2", "scaling-isometry", _params(psi="1", a=2),
                     r["residual"], 1e-8, r["residual"] < 1e-8))
    r = scaling_isometry_check(_random_psi(np.random.default_rng(0)), 1.0, quadrature=q1)
    out.append(Check("isometry-a1", "scaling-isometry", _params(psi="random", a=1),
                     r["residual"], 0.0, r["residual"] == 0.0))
    for a in scales:
        worst, worst_fn = 0.0, 0.0
        for s in range(n_psi):
            psi = _random_psi(np.random.default_rng([int(seed), 2, s]))
            r = scaling_isometry_check(psi, a, quadrature=q1)
            worst = max(worst, r["residual"])
            worst_fn = max(worst_fn, r["function_residual"])
        out.append(Check(f"isometry-a{a:g}", "scaling-isometry",
                         _params(psi="random", a=a, cases=n_psi), worst, 1e-6, worst < 1e-6))
        out.append(Check(f"isometry-function-a{a:g}", "scaling-isometry",
                         _params(psi="random", a=a, cases=n_psi), worst_fn, 1e-6,
                         worst_fn < 1e-6))
    return out


def nesting_checks(seed=0, n_psi: int = 20,
                   pairs: Sequence[tuple] = ((1.0, 2.0), (1.0, 4.0), (2.0, 3.0))) -> list:
    """``|h|^2_{H^b} <= (b/a) |h|^2_{H^a}`` for random unit elements (d = 1)."""
    out = []
    for a, b in pairs:
        q = SpectralMeasure.build(1, a)
        hs = random_unit_ball(q, np.random.default_rng([int(seed), 3, int(10 * a), int(10 * b)]),
                              n=n_psi)
        reps = [nesting_check(h, b) for h in hs]
        slack = min(r.slack for r in reps)
        fn = max(r.function_residual for r in reps)
        ok = all(r.holds for r in reps) and fn < 1e-8
        out.append(Check(f"nesting-{a:g}-{b:g}", "nesting",
                         _params(a=a, b=b, cases=n_psi, min_slack=f"{slack:.3e}",
                                 function_residual=f"{fn:.3e}"),
                         max(r.sq_norm_b / r.bound for r in reps), 1.0, ok))
    h1 = RkhsElement(SpectralMeasure.build(1, 1.0), np.ones(2048, dtype=complex))
    r = nesting_check(h1, 2.0)
    out.append(Check("nesting-const-1-2", "nesting", _params(psi="1", a=1, b=2),
                     r.sq_norm_b, 2.0, r.sq_norm_b <= 2.0))
    return out


def pointwise_checks(seed=0, n_cases: int = 1000, scales: Sequence[float] = (0.1, 1.0, 10.0)
                     ) -> list:
    """Both unit-ball bounds on random elements and random points, plus ``tau^2 = 2d``."""
    out = []
    for d in (1, 2):
        tau2 = SpectralMeasure.build(d).moment(2)
        out.append(Check(f"tau2-d{d}", "unit-ball-pointwise", _params(d=d), tau2, 2.0 * d,
                         abs(tau2 - 2.0 * d) < 1e-8))
    per = [n_cases // len(scales) + (i < n_cases % len(scales)) for i in range(len(scales))]
    for a, m in zip(scales, per):
        q = SpectralMeasure.build(1, a, n_per_axis=1024)
        rng = np.random.default_rng([int(seed), 4, int(100 * a)])
        hs = random_unit_ball(q, rng, n=m, radius="ball")
        worst, ok = 0.0, True
        for h in hs:
            t = rng.uniform(0.0, 1.0, size=(1, 1))
            rep = unit_ball_pointwise_check(h, t, tau=math.sqrt(2.0))
            ok &= rep.holds
            ratio = max(abs(rep.value_at_zero) / rep.bound_at_zero,
                        float(np.max(rep.increment / rep.increment_bound)))
            worst = max(worst, ratio)
        out.append(Check(f"pointwise-a{a:g}", "unit-ball-pointwise", _params(a=a, cases=m),
                         worst, 1.0, ok))
    one = RkhsElement(SpectralMeasure.build(1), np.ones(2048, dtype=complex))
    h0 = float(one(np.zeros((1, 1)))[0])
    out.append(Check("pointwise-const-tight", "unit-ball-pointwise", _params(psi="1"),
                     h0, 1.0, abs(h0 - 1.0) < 1e-8))
    return out


TAIL_PRIORS = (
    ("gamma-root", dict(d=1, shape=1.0, rate=1.0)),
    ("gamma-root", dict(d=1, shape=2.0, rate=1.0)),
    ("gamma-root", dict(d=2, shape=1.0, rate=1.0)),
    ("gamma-root", dict(d=2, shape=2.0, rate=0.5)),
    ("envelope", dict(d=1, p=1.0, q=2.0, D=1.0)),
    ("envelope", dict(d=2, p=0.0, q=3.0, D=0.5)),
)


def tail_checks(a_values: Sequence[float] = (4.0, 6.0)) -> list:
    """The bandwidth tail bound against the tail mass computed by quadrature."""
    out = []
    for kind, kw in TAIL_PRIORS:
        prior = GammaRootPrior(**kw) if kind == "gamma-root" else EnvelopePrior(**kw)
        for a in a_values:
            bound = tail_bound(prior, a)
            mass, _ = integrate.quad(lambda x: math.exp(prior.log_density(x)), a, math.inf,
                                     epsabs=0.0, epsrel=1e-10, limit=200)
            out.append(Check(f"tail-{kind}-" + "-".join(f"{v:g}" for v in kw.values()) + f"-a{a:g}",
                             "bandwidth-tail", _params(prior=kind, a=a, **kw), mass, bound,
                             mass <= bound))
    return out


def quantile_checks() -> list:
    """The four normal-quantile inequalities on dense grids (counts of points that hold)."""
    x_neg = -np.logspace(-6, np.log10(38.0), 20001)
    x_pos = np.logspace(-8, 2.8, 20001)
    u = np.concatenate([np.logspace(-300, np.log10(0.999999), 20001)])
    res = {**normal_quantile_checks(x=np.concatenate([x_neg, x_pos]), u=u)}
    out = []
    for key in ("cdf_tail", "quantile_lower", "quantile_upper", "shifted_quantile"):
        v = res[key]
        out.append(Check(f"quantile-{key}", "normal-quantiles", _params(points=v.size),
                         float(np.sum(v)), float(v.size), bool(np.all(v))))
    q = special.ndtri(0.1)
    lo, hi = -math.sqrt(2 * math.log(10)), -0.5 * math.sqrt(math.log(10))
    out.append(Check("quantile-u0.1", "normal-quantiles", _params(u=0.1), q, lo,
                     lo <= q <= hi))
    c = special.ndtr(2.0 + special.ndtri(math.exp(-2.0)))
    out.append(Check("quantile-shift-x2", "normal-quantiles", _params(x=2), c, 0.5, c >= 0.5))
    return out


# ---------------------------------------------------------------------------
# approximation


def holder_slope(alpha: float = 0.5, scales: Sequence[float] = (2, 4, 8, 16, 32), seed: int = 0
                 ) -> tuple:
    w = make_truth("weierstrass", alpha=alpha, seed=seed)
    errs = np.array([holder_approximant(w, a)[1] for a in scales])
    slope = stats.linregress(np.log(scales), np.log(errs)).slope
    return float(slope), errs


def approximation_checks() -> list:
    out = []
    slope, errs = holder_slope()
    out.append(Check("holder-slope-alpha0.5", "holder-approximation",
                     _params(alpha=0.5, a="2..32", errors=" ".join(f"{e:.3e}" for e in errs)),
                     slope, -0.5, abs(slope + 0.5) <= 0.15))
    _, err = holder_approximant(make_truth("cosine"), 16.0)
    out.append(Check("holder-cosine-a16", "holder-approximation", _params(truth="cosine", a=16),
                     err, 1e-6, err < 1e-6))
    bl = make_truth("band-limited")
    for a in (1.0, 2.0, 5.0):
        _, err = holder_approximant(bl, a, period=1024.0)
        out.append(Check(f"band-limited-a{a:g}", "holder-approximation",
                         _params(truth="band-limited", a=a), err, 1e-10, err < 1e-10))
    g = make_truth("gaussian-bump", width=1.0, center=0.0)
    n4, n8 = analytic_membership(g, 4.0), analytic_membership(g, 8.0)
    out.append(Check("membership-doubling", "analytic-membership",
                     _params(truth="exp(-t^2)", a="4,8", norm_a4=f"{n4:.6g}"),
                     n8 / n4, 2.0, n8 / n4 <= 2.0))
    n3 = analytic_membership(g, 3.0)
    out.append(Check("membership-finite-a3", "analytic-membership",
                     _params(truth="exp(-t^2)", a=3), n3, math.inf, math.isfinite(n3)))
    s = make_truth("sech")
    rows = [analytic_approximant(s, a) for a in (4.0, 8.0, 16.0)]
    C = rows[0][1] / rows[0][2]
    for a, (h, err, shape) in zip((4.0, 8.0, 16.0), rows):
        out.append(Check(f"analytic-error-a{a:g}", "analytic-approximation",
                         _params(truth="sech", a=a, calibrated_at=4), err, C * shape,
                         err <= C * shape * (1 + 1e-9)))
    ratios = [h.sq_norm / a for a, (h, _, _) in zip((4.0, 8.0, 16.0), rows)]
    out.append(Check("analytic-norm-growth", "analytic-approximation",
                     _params(truth="sech", a="4,8,16"), max(ratios) / min(ratios), 2.0,
                     max(ratios) / min(ratios) <= 2.0))
    return out


# ---------------------------------------------------------------------------
# entropy


def entropy_checks(seed=0, n_samples: int = 2000, n_grid: int = 129,
                   scales: Sequence[float] = (1.0, 2.0, 4.0),
                   eps_values: Sequence[float] = (0.25, 0.1)) -> list:
    """Greedy packing numbers of sampled unit-ball elements vs ``K a (log 1/eps)^2``,
    with ``K`` calibrated at the smallest ``a`` and largest ``eps``."""
    t = GridSpec.uniform(n_grid).points()
    logs = {}
    for a in scales:
        q = SpectralMeasure.build(1, a, n_per_axis=512)
        hs = random_unit_ball(q, np.random.default_rng([int(seed), 5, int(10 * a)]),
                              n=n_samples, radius="ball")
        vals = np.array([h(t) for h in hs])
        for e in eps_values:
            logs[a, e] = math.log(greedy_packing(vals, e))
    a0, e0 = min(scales), max(eps_values)
    K = logs[a0, e0] / entropy_bound(a0, e0)
    out = []
    for a in scales:
        for e in eps_values:
            b = entropy_bound(a, e, K)
            out.append(Check(f"entropy-a{a:g}-eps{e:g}", "entropy",
                             _params(a=a, eps=e, K=f"{K:.6g}", samples=n_samples),
                             logs[a, e], b, logs[a, e] <= b * (1 + 1e-12)))
    return out


# ---------------------------------------------------------------------------
# small balls


def small_ball_table(n_paths: int = 100_000, seed=0, scales=(1.0, 2.0, 4.0),
                     eps_values=(0.5, 0.3)) -> dict:
    return {(a, e): small_ball_exponent(a, e, n_paths=n_paths,
                                        seed=[int(seed), 6, int(10 * a), int(100 * e)])
            for a in scales for e in eps_values}


def small_ball_checks(n_paths: int = 100_000, seed=0, table: Optional[dict] = None) -> list:
    """Growth-order surrogate, monotonicity in ``a`` and the shifted-ball inequality."""
    tab = small_ball_table(n_paths, seed) if table is None else table
    norm = {k: v.value / (k[0] * math.log(k[0] / k[1]) ** 2) for k, v in tab.items()}
    ref = norm[1.0, 0.5]
    out = []
    for (a, e), v in sorted(norm.items()):
        out.append(Check(f"small-ball-order-a{a:g}-eps{e:g}", "small-ball",
                         _params(a=a, eps=e, exponent=f"{tab[a, e].value:.6g}",
                                 successes=tab[a, e].successes, paths=tab[a, e].n_paths),
                         v, 3.0 * ref, v <= 3.0 * ref))
    for e in sorted({k[1] for k in tab}):
        vals = [tab[a, e].value for a in sorted({k[0] for k in tab})]
        mono = all(y >= x for x, y in zip(vals, vals[1:]))
        out.append(Check(f"small-ball-monotone-eps{e:g}", "small-ball", _params(eps=e),
                         float(np.min(np.diff(vals))), 0.0, mono))
    r = shifted_ball_check(make_truth("cosine"), 8.0, 0.3, n_paths=n_paths, seed=seed)
    out.append(Check("shifted-ball-cosine-a8-eps0.3", "shifted-ball",
                     _params(truth="cosine", a=8, eps=0.3, phi=f"{r['phi']:.6g}",
                             p_hat=f"{r['probability']:.6g}"),
                     r["upper_confidence"], r["bound"], r["holds"]))
    return out


# ---------------------------------------------------------------------------
# sampler


def prior_invariance_checks(seed=0, n_draws: int = 100_000, thin: int = 2,
                            n_features: int = 32, tol: float = 0.02) -> list:
    """KS distance of ``A``, ``sigma`` and ``w(0.5)`` from their priors for a chain with no data."""
    setting, prior = Regression(0.1, 2.0), GammaRootPrior(d=1)
    cfg = ChainConfig(n_features=n_features, burn_in=1000, n_iter=n_draws * thin, thin=thin,
                      seed=[int(seed), 50])
    chain = run_chain(cfg, Dataset.empty(1), setting, prior)
    marginals = {
        "A": (chain.scale, prior.cdf),
        "sigma": (chain.sigma, stats.uniform(setting.sigma_lo,
                                             setting.sigma_hi - setting.sigma_lo).cdf),
        "w0.5": (chain.values([[0.5]])[:, 0], stats.norm.cdf),
    }
    out = []
    for name, (x, cdf) in marginals.items():
        ks = float(stats.kstest(x, cdf).statistic)
        out.append(Check(f"prior-invariance-{name}", "sampler",
                         _params(draws=x.size, thin=thin, M=n_features), ks, tol, ks < tol))
    return out


CONJUGATE_CASES = ((5, 1.0), (20, 2.0), (5, 2.0), (20, 1.0), (20, 1.5))


def conjugate_checks(seed=0, n_draws: int = 4000, sigma: float = 0.3,
                     n_features: int = 32) -> list:
    """Clamped-hyperparameter regression draws against the closed-form GP posterior.

    Hermite frequencies reproduce the kernel to about 1e-10 for these scales,
    so the feature model and the exact GP coincide.  Mean errors are in units
    of the Monte-Carlo standard error (bound 3), variances relative (bound 0.1).
    """
    out = []
    for i, (n, a) in enumerate(CONJUGATE_CASES):
        rng = np.random.default_rng([int(seed), 51, i])
        x = rng.uniform(size=(n, 1))
        data = Dataset(x, np.sin(2 * math.pi * x[:, 0]) + sigma * rng.standard_normal(n))
        cfg = ChainConfig(n_features=n_features, burn_in=0, n_iter=n_draws, thin=1,
                          seed=[int(seed), 52, i], weight_move="gibbs",
                          frequency_design="hermite", a_init=a, sigma_init=sigma,
                          clamp_bandwidth=True, clamp_sigma=True)
        vals = run_chain(cfg, data, Regression(0.1, 2.0)).values(x)
        mean, cov = conjugate_oracle(data, a, sigma)
        z = np.abs(vals.mean(0) - mean) / (vals.std(0, ddof=1) / math.sqrt(vals.shape[0]))
        rel = np.abs(vals.var(0, ddof=1) / np.diag(cov) - 1)
        p = _params(dataset=i, n=n, a=a, sigma=sigma, draws=n_draws)
        out.append(Check(f"conjugate-mean-{i}", "sampler", p, float(z.max()), 3.0,
                         bool(z.max() <= 3)))
        out.append(Check(f"conjugate-variance-{i}", "sampler", p, float(rel.max()), 0.1,
                         bool(rel.max() <= 0.1)))
    return out


# ---------------------------------------------------------------------------
# suite


GROUPS = {
    "spectral": lambda seed, n_paths: bochner_checks(seed),
    "rkhs": lambda seed, n_paths: (isometry_checks(seed) + nesting_checks(seed)
                                   + pointwise_checks(seed) + tail_checks() + quantile_checks()),
    "approximation": lambda seed, n_paths: approximation_checks(),
    "entropy": lambda seed, n_paths: entropy_checks(seed),
    "small-ball": lambda seed, n_paths: small_ball_checks(n_paths, seed),
    "sampler": lambda seed, n_paths: prior_invariance_checks(seed) + conjugate_checks(seed),
}


def run_suite(groups: Optional[Sequence[str]] = None, seed=0, n_paths: int = 100_000) -> list:
    groups = list(GROUPS) if groups is None else list(groups)
    bad = set(groups) - set(GROUPS)
    if bad:
        raise ValueError(f"unknown check group(s) {sorted(bad)}")
    out = []
    for g in groups:
        out.extend(GROUPS[g](seed, n_paths))
    return out


def check_rows(checks: Sequence[Check]) -> list:
    return [c.row() for c in checks]
