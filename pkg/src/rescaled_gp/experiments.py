"""Contraction-rate and adaptation experiments.

An experiment fixes a setting, a truth, a prior and a chain configuration,
then for every sample size ``n`` and replicate simulates data, runs a chain
and records the distance between the posterior mean and the truth.  The
log-log slope of risk against ``n`` is compared with the theoretical
polynomial exponent.
"""

from __future__ import annotations

import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .bandwidth import EnvelopePrior, GammaRootPrior
from .posterior import (
    ChainConfig,
    Classification,
    Dataset,
    Density,
    Regression,
    empirical_norm,
    hellinger,
    l2g_norm,
    link,
    posterior_functional,
    quadrature_grid,
    run_chain,
    sample_distances,
)
from .truths import Analytic, Holder, TruthFunction, make_truth

__all__ = [
    "ExperimentConfig",
    "RateFormula",
    "RateReport",
    "CellResult",
    "AdaptationReport",
    "theoretical_rate",
    "simulate_data",
    "make_setting",
    "make_prior",
    "run_cell",
    "rate_experiment",
    "adaptation_experiment",
    "fit_slope",
]


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateFormula:
    """``n^-exponent (log n)^log_power`` together with the two rates of the
    general contraction theorem: ``eps_n`` with log power ``kappa1`` and
    ``eps_bar_n = eps_n (log n)^kappa2``."""

    exponent: float
    log_power: float
    kappa1: float
    kappa2: float

    @property
    def eps_log_power(self) -> float:
        return self.kappa1

    @property
    def eps_bar_log_power(self) -> float:
        return self.kappa1 + self.kappa2


def theoretical_rate(smoothness, d: int = 1, q: float = 0.0, nu: float = 2.0) -> RateFormula:
    """Polynomial exponent and logarithmic power of the contraction rate.

    For ``Holder(alpha)``: exponent ``alpha / (2 alpha + d)``,
    ``kappa1 = max(1 + d, q) / (2 + d / alpha)``, ``kappa2 = (1 + d - q) / 2``
    and headline log power ``(kappa1 + kappa2) / (1 + d)``, which for q = 0 is
    ``(4 alpha + d) / (4 alpha + 2 d)``.

    For ``Analytic(gamma, r)``: exponent 1/2, ``kappa1 = (d + 1)/2`` plus
    ``d / (2 r)`` when ``r < nu``, ``kappa2 = (d + 1)/2`` and headline power
    ``kappa1 + kappa2``.
    """
    if isinstance(smoothness, Holder):
        a = smoothness.alpha
        if a <= 0:
            raise ValueError("alpha must be positive")
        k1 = max(1.0 + d, q) / (2.0 + d / a)
        k2 = (1.0 + d - q) / 2.0
        return RateFormula(a / (2 * a + d), (k1 + k2) / (1 + d), k1, k2)
    if isinstance(smoothness, Analytic):
        k1 = (d + 1) / 2.0 + (d / (2.0 * smoothness.r) if smoothness.r < nu else 0.0)
        k2 = (d + 1) / 2.0
        return RateFormula(0.5, k1 + k2, k1, k2)
    raise ValueError(f"unsupported smoothness descriptor {smoothness!r}")


# ---------------------------------------------------------------------------
# configuration


_CHAIN_KEYS = {f for f in ChainConfig.__dataclass_fields__}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a rate experiment.

    ``truth`` is ``{"id": ..., **params}``; ``prior`` is ``{"shape", "rate"}``
    for the Gamma-root prior or ``{"p", "q", "D"}`` for the envelope prior;
    ``chain`` holds :class:`~rescaled_gp.posterior.ChainConfig` fields (its
    ``seed`` is overridden per cell).
    """

    setting: str = "regression"
    d: int = 1
    truth: dict = field(default_factory=lambda: {"id": "smoothed-weierstrass", "alpha": 1.0})
    n_grid: tuple = (100, 400, 1600, 6400)
    replicates: int = 10
    prior: dict = field(default_factory=lambda: {"shape": 1.0, "rate": 1.0})
    chain: dict = field(default_factory=dict)
    sigma0: float = 0.5
    sigma_interval: tuple = (0.1, 10.0)
    link: str = "logistic"
    seed: int = 0
    name: str = "experiment"
    out_dir: Optional[str] = None
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        ng = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", ng)
        object.__setattr__(self, "sigma_interval", tuple(float(s) for s in self.sigma_interval))
        if len(ng) < 4 or any(b <= a for a, b in zip(ng, ng[1:])) or ng[0] < 1:
            raise ValueError("n_grid must be strictly increasing with at least 4 points")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.setting not in ("density", "regression", "classification"):
            raise ValueError(f"unknown setting {self.setting!r}")
        if "id" not in self.truth:
            raise ValueError("truth needs an 'id'")
        bad = set(self.chain) - _CHAIN_KEYS
        if bad:
            raise ValueError(f"unknown chain key(s): {sorted(bad)}")
        bad = set(self.expect) - {"slope_band", "slope_max", "spearman_max"}
        if bad:
            raise ValueError(f"unknown expect key(s): {sorted(bad)}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_grid"] = list(self.n_grid)
        out["sigma_interval"] = list(self.sigma_interval)
        return out

    def with_truth(self, truth: dict, name: Optional[str] = None) -> "ExperimentConfig":
        kw = self.to_dict()
        kw["truth"] = dict(truth)
        if name is not None:
            kw["name"] = name
        return ExperimentConfig(**kw)


def make_setting(config: ExperimentConfig):
    if config.setting == "density":
        return Density()
    if config.setting == "regression":
        return Regression(*config.sigma_interval)
    return Classification(config.link)


def make_prior(config: ExperimentConfig):
    p = dict(config.prior)
    if {"p", "q", "D"} & set(p):
        return EnvelopePrior(d=config.d, p=p.get("p", 0.0), q=p.get("q", 0.0), D=p.get("D", 1.0))
    bad = set(p) - {"shape", "rate"}
    if bad:
        raise ValueError(f"unknown prior key(s): {sorted(bad)}")
    return GammaRootPrior(d=config.d, shape=p.get("shape", 1.0), rate=p.get("rate", 1.0))


def make_config_truth(config: ExperimentConfig) -> TruthFunction:
    params = dict(config.truth)
    tid = params.pop("id")
    params.setdefault("d", config.d)
    return make_truth(tid, **params)


# ---------------------------------------------------------------------------
# data


def _midpoint_design(n: int, d: int) -> np.ndarray:
    m = int(round(n ** (1.0 / d)))
    if m**d != n:
        raise ValueError(f"equispaced design in d={d} needs n to be a perfect power, got {n}")
    axis = (np.arange(1, m + 1) - 0.5) / m
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def simulate_data(truth: TruthFunction, setting, n: int, seed, sigma0: float = 0.5,
                  safety: float = 1.05) -> Dataset:
    """Simulate a dataset of size ``n``.

    Density: i.i.d. from ``exp(w0) / int exp(w0)`` by rejection from the
    uniform law, envelope ``safety * max exp(w0)`` over a dense grid.
    Regression: midpoint design ``(i - 1/2)/n`` (tensor grid for d > 1) and
    ``Y = w0(t) + sigma0 * N(0, 1)``.  Classification: ``X`` uniform,
    ``Y ~ Bernoulli(link(w0(X)))``.
    """
    rng = np.random.default_rng(seed)
    d = truth.d
    if isinstance(setting, Regression):
        x = _midpoint_design(n, d)
        y = truth(x) + sigma0 * rng.standard_normal(n)
        return Dataset(x, y)
    if isinstance(setting, Classification):
        x = rng.uniform(size=(n, d))
        y = (rng.uniform(size=n) < link(truth(x), setting.link)).astype(float)
        return Dataset(x, y)
    grid = quadrature_grid(d).points()
    top = safety * float(np.max(np.exp(truth(grid))))
    out = np.empty((0, d))
    while out.shape[0] < n:
        m = max(2 * (n - out.shape[0]), 64)
        cand = rng.uniform(size=(m, d))
        keep = rng.uniform(size=m) * top < np.exp(truth(cand))
        out = np.vstack([out, cand[keep]])
    return Dataset(out[:n])


# ---------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class CellResult:
    n: int
    replicate: int
    risk: float                  # distance of the posterior mean
    median_distance: float       # posterior median of the draw-wise distance
    median_bandwidth: float
    acceptance_bandwidth: float
    acceptance_sigma: float
    flagged: bool


def _cell_seeds(master: int, n: int, rep: int) -> tuple:
    ss = np.random.SeedSequence([int(master), int(n), int(rep)])
    data_ss, chain_ss = ss.spawn(2)
    return data_ss, int(chain_ss.generate_state(1, dtype=np.uint32)[0])


def run_cell(config: ExperimentConfig, n: int, rep: int) -> CellResult:
    """Simulate, fit and score one (n, replicate) cell.

    Seeds depend only on the master seed, ``n`` and the replicate, so cells
    are reproducible individually and independent of run order.
    """
    truth = make_config_truth(config)
    setting = make_setting(config)
    prior = make_prior(config)
    data_seed, chain_seed = _cell_seeds(config.seed, n, rep)
    data = simulate_data(truth, setting, n, data_seed, config.sigma0)
    chain_kw = dict(config.chain)
    chain_kw["seed"] = chain_seed
    chain = run_chain(ChainConfig(**chain_kw), data, setting, prior)
    grid = quadrature_grid(config.d)
    if isinstance(setting, Regression):
        mean = chain.values(data.x).mean(axis=0)
        risk = float(empirical_norm(mean - truth(data.x)))
        dist = sample_distances(chain, truth, setting, data=data)
    else:
        mean, _, _ = posterior_functional(chain, grid, setting)
        pts = grid.points()
        if isinstance(setting, Density):
            f0 = np.exp(truth(pts))
            f0 /= np.sum(f0 * grid.trapezoid_weights())
            risk = float(hellinger(mean, f0, grid))
        else:
            risk = float(l2g_norm(mean, link(truth(pts), setting.link), grid=grid))
        dist = sample_distances(chain, truth, setting, grid=grid)
    acc_b = chain.diagnostics["acceptance_bandwidth"]
    acc_s = chain.diagnostics["acceptance_sigma"]
    flagged = bool(np.isfinite(acc_b) and acc_b < 0.02)
    return CellResult(n, rep, risk, float(np.median(dist)), float(np.median(chain.scale)),
                      float(acc_b), float(acc_s), flagged)


def fit_slope(n, risk) -> tuple:
    """Least squares of log risk on log n: ``(slope, standard error, intercept)``."""
    x, y = np.log(np.asarray(n, dtype=float)), np.log(np.asarray(risk, dtype=float))
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr), float(res.intercept)


# ---------------------------------------------------------------------------
# reports


@dataclass
class RateReport:
    config: ExperimentConfig
    cells: list
    slope: float
    slope_se: float
    intercept: float
    theory: RateFormula
    spearman: float
    checks: dict = field(default_factory=dict)

    CELL_COLUMNS = ("experiment", "setting", "truth", "n", "replicate", "risk",
                    "median_distance", "median_bandwidth", "acceptance_bandwidth",
                    "acceptance_sigma", "flagged")
    SUMMARY_COLUMNS = ("experiment", "setting", "truth", "slope", "slope_se", "intercept",
                       "theory_slope", "theory_log_power", "kappa1", "kappa2",
                       "spearman", "n_cells", "n_flagged", "median_bandwidth_largest_n",
                       "passed")

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def median_bandwidth(self, n: Optional[int] = None) -> float:
        n = max(c.n for c in self.cells) if n is None else n
        return float(np.median([c.median_bandwidth for c in self.cells if c.n == n]))

    def cell_rows(self) -> list:
        truth = self.config.truth["id"]
        return [(self.config.name, self.config.setting, truth, c.n, c.replicate, c.risk,
                 c.median_distance, c.median_bandwidth, c.acceptance_bandwidth,
                 c.acceptance_sigma, int(c.flagged)) for c in self.cells]

    def summary_row(self) -> tuple:
        return (self.config.name, self.config.setting, self.config.truth["id"], self.slope,
                self.slope_se, self.intercept, -self.theory.exponent, self.theory.log_power,
                self.theory.kappa1, self.theory.kappa2, self.spearman, len(self.cells),
                sum(c.flagged for c in self.cells), self.median_bandwidth(), int(self.passed))


def _smoothness_for(truth: TruthFunction):
    s = truth.smoothness
    if isinstance(s, Analytic) and not math.isfinite(s.r):
        return Analytic(math.inf, 2.0)
    return s


def rate_experiment(config: ExperimentConfig, threads: int = 1,
                    cells: Optional[Sequence[tuple]] = None) -> RateReport:
    """Run every (n, replicate) cell, fit the slope and evaluate ``config.expect``.

    ``threads > 1`` runs cells in a process pool; the report is assembled in
    cell order, so output does not depend on the number of workers.
    Flagged cells (bandwidth acceptance below 0.02) are excluded from the
    fit with a warning; a non-finite or non-positive risk raises.
    """
    todo = list(cells) if cells is not None else [
        (n, r) for n in config.n_grid for r in range(config.replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run_cell, [config] * len(todo), *zip(*todo)))
    else:
        results = [run_cell(config, n, r) for n, r in todo]
    for c in results:
        if not (np.isfinite(c.risk) and c.risk > 0):
            raise FloatingPointError(f"risk {c.risk} in cell n={c.n}, replicate={c.replicate}")
    used = [c for c in results if not c.flagged]
    if len(used) < len(results):
        warnings.warn(f"{len(results) - len(used)} flagged cell(s) excluded from the fit")
    ns = sorted({c.n for c in used})
    if len(ns) >= 2:
        slope, se, icpt = fit_slope([c.n for c in used], [c.risk for c in used])
        med = [np.median([c.risk for c in used if c.n == n]) for n in ns]
        rho = float(stats.spearmanr(ns, med).statistic) if len(ns) > 2 else -1.0
    else:
        slope = se = icpt = rho = math.nan
    truth = make_config_truth(config)
    theory = theoretical_rate(_smoothness_for(truth), config.d, config.prior.get("q", 0.0))
    rep = RateReport(config, results, slope, se, icpt, theory, rho)
    ex = config.expect
    if "slope_band" in ex:
        lo, hi = ex["slope_band"]
        rep.checks["slope_band"] = bool(lo <= slope <= hi)
    if "slope_max" in ex:
        rep.checks["slope_max"] = bool(slope <= ex["slope_max"])
    if "spearman_max" in ex:
        rep.checks["spearman_max"] = bool(rho <= ex["spearman_max"])
    return rep


@dataclass
class AdaptationReport:
    rough: RateReport
    smooth: RateReport
    gap: float
    min_gap: float

    @property
    def slope_ordered(self) -> bool:
        return self.smooth.slope < self.rough.slope - self.min_gap

    @property
    def bandwidth_ordered(self) -> bool:
        """Soft check: the rougher truth needs a larger bandwidth at the largest n."""
        return self.rough.median_bandwidth() > self.smooth.median_bandwidth()

    SUMMARY_COLUMNS = ("rough_truth", "smooth_truth", "rough_slope", "smooth_slope", "gap",
                       "min_gap", "slope_ordered", "rough_median_bandwidth",
                       "smooth_median_bandwidth", "bandwidth_ordered")

    def summary_row(self) -> tuple:
        return (self.rough.config.truth["id"], self.smooth.config.truth["id"], self.rough.slope,
                self.smooth.slope, self.gap, self.min_gap, int(self.slope_ordered),
                self.rough.median_bandwidth(), self.smooth.median_bandwidth(),
                int(self.bandwidth_ordered))


def adaptation_experiment(config: ExperimentConfig, rough: dict, smooth: dict,
                          min_gap: float = 0.05, threads: int = 1) -> AdaptationReport:
    """Run the same prior and sampler on a rough and a smooth truth."""
    r = rate_experiment(config.with_truth(rough, f"{config.name}-rough"), threads)
    s = rate_experiment(config.with_truth(smooth, f"{config.name}-smooth"), threads)
    return AdaptationReport(r, s, r.slope - s.slope, min_gap)


def truth_seed_name(truth: dict) -> int:
    """Stable integer tag of a truth specification (for file names)."""
    return zlib.crc32(repr(sorted(truth.items())).encode()) & 0xFFFFFFFF
