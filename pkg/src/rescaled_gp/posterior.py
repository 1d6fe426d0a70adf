"""Posterior inference under the rescaled-field prior.

The latent function is a feature expansion

    w(t) = sum_j c_j (z_j cos(A <lam_j, t>) + z'_j sin(A <lam_j, t>)),

with standard-normal weights ``(z, z')``, frequencies fixed per chain and
``A = exp(ell)`` drawn from a bandwidth prior.  Three observation models are
supported: density estimation (``f = e^w / int e^w``), Gaussian regression
with unknown noise scale, and binary classification through a logistic or
probit link.

The sampler is a systematic scan of

* weights: elliptical slice sampling (any likelihood) or an exact Gaussian
  draw (regression);
* bandwidth: random-walk Metropolis on ``ell``, either with the weights held
  fixed or jointly with a fresh weight vector drawn from a Gaussian
  approximation of ``z | ell`` (exact for regression);
* noise scale (regression): random-walk Metropolis on the prior interval.

Step sizes adapt during burn-in toward acceptance 0.3 and are frozen after.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy import linalg, special

from .bandwidth import BandwidthPrior, GammaRootPrior
from .spectral import (
    GridSpec,
    _as_points,
    covariance_matrix,
    default_n_features,
    hermite_frequencies,
    jittered_cholesky,
)

__all__ = [
    "Density",
    "Regression",
    "Classification",
    "Dataset",
    "LatentState",
    "Model",
    "ChainConfig",
    "Chain",
    "link",
    "log_likelihood",
    "log_prior",
    "log_normalizer",
    "initial_state",
    "update_weights",
    "update_bandwidth",
    "update_sigma",
    "run_chain",
    "posterior_functional",
    "hellinger",
    "empirical_norm",
    "l2g_norm",
    "sample_distances",
    "contraction_mass",
    "conjugate_oracle",
    "quadrature_grid",
]


# ---------------------------------------------------------------------------
# settings and data


@dataclass(frozen=True)
class Density:
    name: str = "density"


@dataclass(frozen=True)
class Regression:
    sigma_lo: float = 0.1
    sigma_hi: float = 10.0
    name: str = "regression"

    def __post_init__(self):
        if not 0 < self.sigma_lo < self.sigma_hi:
            raise ValueError("need 0 < sigma_lo < sigma_hi")


@dataclass(frozen=True)
class Classification:
    link: str = "logistic"
    name: str = "classification"

    def __post_init__(self):
        if self.link not in ("logistic", "probit"):
            raise ValueError(f"unknown link {self.link!r}")


Setting = Union[Density, Regression, Classification]


def link(w, name: str = "logistic") -> np.ndarray:
    """Logistic or probit (standard normal CDF) link."""
    w = np.asarray(w, dtype=float)
    if name == "logistic":
        return special.expit(w)
    if name == "probit":
        return special.ndtr(w)
    raise ValueError(f"unknown link {name!r}")


@dataclass(frozen=True)
class Dataset:
    """Covariates ``x`` of shape (n, d) in [0, 1]^d and responses ``y``
    (None for density estimation, reals for regression, 0/1 for
    classification)."""

    x: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.size and (np.any(x < 0) or np.any(x > 1)):
            raise ValueError("covariates must lie in [0, 1]^d")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float).reshape(-1)
            if y.shape[0] != x.shape[0]:
                raise ValueError("x and y have different lengths")
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def empty(cls, d: int = 1, responses: bool = True) -> "Dataset":
        return cls(np.zeros((0, d)), np.zeros(0) if responses else None)


def _check_data(data: Dataset, setting: Setting):
    if isinstance(setting, Density):
        return
    if data.y is None:
        raise ValueError(f"{setting.name} needs responses")
    if isinstance(setting, Classification) and np.any((data.y != 0) & (data.y != 1)):
        raise ValueError("classification labels must be 0 or 1")


# ---------------------------------------------------------------------------
# latent state


@dataclass(frozen=True)
class LatentState:
    """Feature frequencies (fixed per chain), weights, log-bandwidth and noise scale.

    ``weights`` holds the cosine weights followed by the sine weights (2M).
    """

    frequencies: np.ndarray
    weights: np.ndarray
    ell: float
    sigma: Optional[float] = None
    amplitudes: Optional[np.ndarray] = None

    @property
    def n_features(self) -> int:
        return self.frequencies.shape[0]

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    @property
    def scale(self) -> float:
        return math.exp(self.ell)

    @property
    def coefficients(self) -> np.ndarray:
        if self.amplitudes is None:
            return np.full(self.n_features, 1.0 / math.sqrt(self.n_features))
        return self.amplitudes

    def features(self, t, ell: Optional[float] = None) -> np.ndarray:
        """Design matrix (n, 2M) so that ``w(t) = features(t) @ weights``."""
        return _features(self.frequencies, self.coefficients,
                         self.ell if ell is None else ell, t)

    def __call__(self, t) -> np.ndarray:
        return self.features(t) @ self.weights

    def with_(self, **kw) -> "LatentState":
        return replace(self, **kw)


def _features(freq, coef, ell, t) -> np.ndarray:
    t = _as_points(t, freq.shape[1])
    phase = (math.exp(ell) * t) @ freq.T
    return np.hstack([np.cos(phase) * coef, np.sin(phase) * coef])


def initial_state(n_features: int, seed, prior: BandwidthPrior, setting: Setting,
                  d: int = 1, design: str = "random", a_init: Optional[float] = None,
                  sigma_init: Optional[float] = None) -> LatentState:
    """Weights 0, ``A`` at the prior median, ``sigma`` at the interval midpoint."""
    rng = np.random.default_rng(seed)
    if design == "random":
        freq = math.sqrt(2.0) * rng.standard_normal((n_features, d))
        amp = None
    elif design == "hermite":
        freq, w = hermite_frequencies(n_features, d)
        amp = np.sqrt(w)
    else:
        raise ValueError(f"unknown frequency design {design!r}")
    a0 = prior.median() if a_init is None else a_init
    sigma = None
    if isinstance(setting, Regression):
        sigma = 0.5 * (setting.sigma_lo + setting.sigma_hi) if sigma_init is None else sigma_init
    return LatentState(freq, np.zeros(2 * freq.shape[0]), math.log(a0), sigma, amp)


def quadrature_grid(d: int) -> GridSpec:
    """Dyadic grid for the density normaliser: 2^9+1 nodes (d=1), 2^6+1 per axis (d=2)."""
    return GridSpec.dyadic({1: 9, 2: 6}.get(d, 4), d)


def log_normalizer(values, weights) -> float:
    """``log sum_j weights_j exp(values_j)`` with max subtraction."""
    values = np.asarray(values, dtype=float)
    m = float(np.max(values))
    return m + math.log(float(np.sum(weights * np.exp(values - m))))


# ---------------------------------------------------------------------------
# model: cached features and likelihood pieces at a given bandwidth


class _Cache:
    """Likelihood ingredients at one value of ``ell``."""

    def __init__(self, model: "Model", ell: float):
        self.ell = ell
        st, data = model.template, model.data
        if isinstance(model.setting, Density):
            self.grid_features = st.features(model.grid_points, ell)
            self.data_sum = (st.features(data.x, ell).sum(axis=0) if data.n
                             else np.zeros(2 * st.n_features))
            self.phi = None
        else:
            self.phi = st.features(data.x, ell)
        self._gram = None
        self._phi_y = None

    def gram(self):
        if self._gram is None:
            self._gram = self.phi.T @ self.phi
        return self._gram

    def phi_y(self, y):
        if self._phi_y is None:
            self._phi_y = self.phi.T @ y
        return self._phi_y


class Model:
    """Data, setting and prior bundled with a per-bandwidth feature cache.

    ``template`` supplies frequencies and amplitudes; its weights are
    ignored.
    """

    def __init__(self, data: Dataset, setting: Setting, prior: BandwidthPrior,
                 template: LatentState, cache_size: int = 4):
        _check_data(data, setting)
        if data.n and data.d != template.d:
            raise ValueError("data and frequencies differ in dimension")
        self.data, self.setting, self.prior, self.template = data, setting, prior, template
        self.cache_size = cache_size
        self._caches: dict = {}
        self._laplace: dict = {}
        if isinstance(setting, Density):
            g = quadrature_grid(template.d)
            self.grid_points = g.points()
            self.log_grid_weights = np.log(g.trapezoid_weights())

    # -- caches
    def cache(self, ell: float) -> _Cache:
        c = self._caches.get(ell)
        if c is None:
            if len(self._caches) >= self.cache_size:
                self._caches.pop(next(iter(self._caches)))
            c = _Cache(self, ell)
            self._caches[ell] = c
        return c

    # -- likelihood
    def loglik(self, z: np.ndarray, ell: float, sigma: Optional[float] = None) -> float:
        data, s = self.data, self.setting
        if data.n == 0:
            return 0.0
        c = self.cache(ell)
        if isinstance(s, Density):
            wg = c.grid_features @ z
            return float(c.data_sum @ z) - data.n * log_normalizer(wg, np.exp(self.log_grid_weights))
        w = c.phi @ z
        if isinstance(s, Regression):
            r = data.y - w
            return float(-0.5 * data.n * math.log(2 * math.pi * sigma**2) - 0.5 * (r @ r) / sigma**2)
        return float(np.sum(_class_loglik(w, data.y, s.link)))

    def log_prior(self, z: np.ndarray, ell: float, sigma: Optional[float] = None) -> float:
        return _log_prior(z, ell, sigma, self.prior, self.setting)

    def log_post(self, z, ell, sigma=None) -> float:
        lp = self.log_prior(z, ell, sigma)
        if not np.isfinite(lp):
            return -math.inf
        return lp + self.loglik(z, ell, sigma)

    # -- gaussian approximation of z | ell, sigma
    def laplace(self, ell: float, sigma: Optional[float] = None, tol: float = 1e-6,
                max_iter: int = 4) -> tuple:
        """Mode ``m`` and Cholesky factor ``L`` of the Hessian ``H = L L^T`` of
        ``-log p(z | ell, sigma, data)``.  Exact for regression."""
        key = (ell, sigma)
        hit = self._laplace.get(key)
        if hit is not None:
            return hit
        data, s = self.data, self.setting
        P = 2 * self.template.n_features
        if data.n == 0:
            out = (np.zeros(P), np.eye(P))
        elif isinstance(s, Regression):
            c = self.cache(ell)
            H = np.eye(P) + c.gram() / sigma**2
            L = linalg.cholesky(H, lower=True)
            m = linalg.cho_solve((L, True), c.phi_y(data.y) / sigma**2)
            out = (m, L)
        else:
            out = self._newton(ell, P, tol, max_iter)
        if len(self._laplace) >= self.cache_size:
            self._laplace.pop(next(iter(self._laplace)))
        self._laplace[key] = out
        return out

    def _objective(self, z, ell):
        """``-log-likelihood`` at ``z`` (no prior term)."""
        return -self.loglik(z, ell)

    def _grad_hess(self, z, ell):
        data, s = self.data, self.setting
        c = self.cache(ell)
        if isinstance(s, Density):
            G = c.grid_features
            lw = self.log_grid_weights + G @ z
            p = np.exp(lw - special.logsumexp(lw))
            Gp = G.T @ p
            grad = -(c.data_sum - data.n * Gp)
            Gs = G * np.sqrt(p)[:, None]
            H = data.n * (Gs.T @ Gs - np.outer(Gp, Gp))
            return grad, H
        w = c.phi @ z
        _, g, h = _class_derivs(w, data.y, s.link)
        Ps = c.phi * np.sqrt(h)[:, None]
        return -(c.phi.T @ g), Ps.T @ Ps

    def _newton(self, ell, P, tol, max_iter):
        """Damped Newton from ``z = 0``.  The iteration count is capped: the
        result only has to be a deterministic function of ``ell`` to serve as
        an exact Metropolis-Hastings proposal, not the exact mode."""
        z = np.zeros(P)
        obj = self._objective(z, ell)
        eye = np.eye(P)
        for _ in range(max_iter):
            g, H = self._grad_hess(z, ell)
            grad = g + z
            L = linalg.cholesky(H + eye, lower=True)
            step = linalg.cho_solve((L, True), grad)
            dec = float(grad @ step)
            if dec < 2 * tol:
                return z, L
            t = 1.0
            while True:
                zn = z - t * step
                on = self._objective(zn, ell) + 0.5 * zn @ zn
                if on <= obj - 0.25 * t * dec or t < 1e-6:
                    break
                t *= 0.5
            z, obj = zn, on
        _, H = self._grad_hess(z, ell)
        return z, linalg.cholesky(H + eye, lower=True)


def _class_loglik(w, y, name):
    s = 2 * y - 1
    if name == "logistic":
        return -np.logaddexp(0.0, -s * w)
    return special.log_ndtr(s * w)


def _class_derivs(w, y, name):
    """Per-observation log-likelihood, first derivative and minus the second."""
    s = 2 * y - 1
    u = s * w
    if name == "logistic":
        ll = -np.logaddexp(0.0, -u)
        p = special.expit(w)
        return ll, y - p, p * (1 - p)
    ll = special.log_ndtr(u)
    r = np.exp(-0.5 * u**2 - 0.5 * math.log(2 * math.pi) - ll)
    return ll, s * r, r * (u + r)


def _log_prior(z, ell, sigma, prior: BandwidthPrior, setting: Setting) -> float:
    P = z.shape[0]
    lp = -0.5 * float(z @ z) - 0.5 * P * math.log(2 * math.pi)
    lp += float(prior.log_density_log_scale(ell))
    if isinstance(setting, Regression):
        if sigma is None or not setting.sigma_lo <= sigma <= setting.sigma_hi:
            return -math.inf
        lp -= math.log(setting.sigma_hi - setting.sigma_lo)
    return lp


def log_likelihood(state: LatentState, data: Dataset, setting: Setting) -> float:
    """Log-likelihood of ``data`` under the function ``state`` represents.

    Density: ``sum_i w(X_i) - n log int e^w`` (normaliser on the dyadic
    quadrature grid); Regression: Gaussian with scale ``state.sigma``;
    Classification: Bernoulli with success probability ``link(w(X_i))``.
    """
    model = Model(data, setting, GammaRootPrior(d=state.d), state)
    return model.loglik(state.weights, state.ell, state.sigma)


def log_prior(state: LatentState, prior: BandwidthPrior, setting: Setting) -> float:
    """Standard-normal weights, ``log g(e^ell) + ell`` and (regression) the
    uniform density of ``sigma``; ``-inf`` outside the sigma interval."""
    return _log_prior(state.weights, state.ell, state.sigma, prior, setting)


# ---------------------------------------------------------------------------
# updates


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ess(z, loglik, rng, cur=None):
    """One elliptical slice step for prior N(0, I).  Returns (z, loglik, n_evals)."""
    cur = loglik(z) if cur is None else cur
    nu = rng.standard_normal(z.shape[0])
    thresh = cur + math.log(rng.uniform())
    theta = rng.uniform(0.0, 2 * math.pi)
    lo, hi = theta - 2 * math.pi, theta
    evals = 0
    while True:
        prop = z * math.cos(theta) + nu * math.sin(theta)
        val = loglik(prop)
        evals += 1
        if val > thresh:
            return prop, val, evals
        if theta < 0:
            lo = theta
        else:
            hi = theta
        if hi - lo < 1e-12:
            return z, cur, evals
        theta = rng.uniform(lo, hi)


def _gaussian_draw(m, L, rng):
    eps = rng.standard_normal(m.shape[0])
    return m + linalg.solve_triangular(L, eps, lower=True, trans="T")


def _gaussian_logq(z, m, L) -> float:
    v = L.T @ (z - m)
    return float(-0.5 * v @ v + np.sum(np.log(np.diag(L))) - 0.5 * m.shape[0] * math.log(2 * math.pi))


def update_weights(state: LatentState, data: Dataset, setting: Setting, seed,
                   method: str = "ess", model: Optional[Model] = None) -> LatentState:
    """Update the weights with ``(ell, sigma)`` fixed.

    ``method="ess"`` is one elliptical slice step (always moves or returns the
    current point after the bracket collapses).  ``method="gibbs"`` draws the
    weights exactly from their Gaussian conditional (regression only).
    """
    model = Model(data, setting, GammaRootPrior(d=state.d), state) if model is None else model
    rng = _rng(seed)
    if method == "gibbs":
        if not isinstance(setting, Regression):
            raise ValueError("exact weight draws are available for regression only")
        m, L = model.laplace(state.ell, state.sigma)
        return state.with_(weights=_gaussian_draw(m, L, rng))
    if method != "ess":
        raise ValueError(f"unknown weight update {method!r}")
    z, _, _ = _ess(state.weights, lambda v: model.loglik(v, state.ell, state.sigma), rng)
    return state.with_(weights=z)


def update_bandwidth(state: LatentState, data: Dataset, setting: Setting,
                     prior: BandwidthPrior, seed, step: float = 0.5, method: str = "joint",
                     model: Optional[Model] = None) -> tuple:
    """Random-walk Metropolis on ``ell = log A``.  Returns ``(state, accepted)``.

    ``method="fixed"`` keeps the weights, targeting ``p(ell | z, data)``.
    ``method="joint"`` proposes ``ell'`` together with weights drawn from the
    Gaussian approximation of ``z | ell'`` and accepts with the full
    Metropolis-Hastings ratio, which targets the joint posterior exactly.
    For regression the approximation is the exact conditional, so this is
    a collapsed update of ``ell``.
    """
    model = Model(data, setting, prior, state) if model is None else model
    rng = _rng(seed)
    ell, z, sigma = state.ell, state.weights, state.sigma
    prop = ell + step * rng.standard_normal()
    if step == 0:
        return state, True
    if method == "fixed":
        cur = model.log_post(z, ell, sigma)
        new = model.log_post(z, prop, sigma)
        if math.log(rng.uniform()) < new - cur:
            return state.with_(ell=prop), True
        return state, False
    if method != "joint":
        raise ValueError(f"unknown bandwidth update {method!r}")
    if not np.isfinite(model.prior.log_density_log_scale(prop)):
        return state, False
    m0, L0 = model.laplace(ell, sigma)
    m1, L1 = model.laplace(prop, sigma)
    z1 = _gaussian_draw(m1, L1, rng)
    cur = model.log_post(z, ell, sigma) - _gaussian_logq(z, m0, L0)
    new = model.log_post(z1, prop, sigma) - _gaussian_logq(z1, m1, L1)
    if math.log(rng.uniform()) < new - cur:
        return state.with_(ell=prop, weights=z1), True
    return state, False


def update_sigma(state: LatentState, data: Dataset, setting: Setting, seed,
                 step: float = 0.1, prior: Optional[BandwidthPrior] = None,
                 model: Optional[Model] = None) -> tuple:
    """Random-walk Metropolis on ``sigma`` under its uniform prior.

    Proposals outside ``[sigma_lo, sigma_hi]`` are rejected.  Returns
    ``(state, accepted)``.
    """
    if not isinstance(setting, Regression):
        raise ValueError("sigma is only updated in the regression setting")
    model = Model(data, setting, prior or GammaRootPrior(d=state.d), state) if model is None else model
    rng = _rng(seed)
    prop = state.sigma + step * rng.standard_normal()
    if not setting.sigma_lo <= prop <= setting.sigma_hi:
        return state, False
    cur = model.loglik(state.weights, state.ell, state.sigma)
    new = model.loglik(state.weights, state.ell, prop)
    if math.log(rng.uniform()) < new - cur:
        return state.with_(sigma=prop), True
    return state, False


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True)
class ChainConfig:
    """Sampler settings.

    ``weight_move`` is ``"ess"`` or ``"gibbs"`` (regression); ``bandwidth_move``
    is ``"joint"`` or ``"fixed"``.  ``clamp_bandwidth`` / ``clamp_sigma`` hold
    those coordinates at their initial values.  ``n_iter`` counts post
    burn-in scans; every ``thin``-th is stored.
    """

    n_features: Optional[int] = None
    burn_in: int = 2000
    n_iter: int = 10_000
    thin: int = 5
    seed: int = 0
    weight_move: str = "ess"
    weight_steps: int = 1
    bandwidth_move: str = "joint"
    frequency_design: str = "random"
    step_ell: float = 0.5
    step_sigma: float = 0.2
    target_accept: float = 0.3
    a_init: Optional[float] = None
    sigma_init: Optional[float] = None
    clamp_bandwidth: bool = False
    clamp_sigma: bool = False

    def __post_init__(self):
        if min(self.burn_in, self.n_iter) < 0 or self.thin < 1 or self.weight_steps < 0:
            raise ValueError("burn_in, n_iter >= 0, thin >= 1, weight_steps >= 0 required")
        if self.weight_move not in ("ess", "gibbs"):
            raise ValueError(f"unknown weight move {self.weight_move!r}")
        if self.bandwidth_move not in ("joint", "fixed"):
            raise ValueError(f"unknown bandwidth move {self.bandwidth_move!r}")


@dataclass
class Chain:
    """Stored (thinned, post burn-in) states plus diagnostics.

    ``weights`` has shape (S, 2M); ``ell`` and ``sigma`` shape (S,).  A chain
    with no stored samples holds the initial state as its single sample.
    """

    frequencies: np.ndarray
    amplitudes: Optional[np.ndarray]
    weights: np.ndarray
    ell: np.ndarray
    sigma: Optional[np.ndarray]
    log_post: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    config: Optional[ChainConfig] = None

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.ell)

    def state(self, i: int) -> LatentState:
        s = None if self.sigma is None else float(self.sigma[i])
        return LatentState(self.frequencies, self.weights[i], float(self.ell[i]), s, self.amplitudes)

    def values(self, t) -> np.ndarray:
        """Latent function values, shape (S, n_points)."""
        t = _as_points(t, self.frequencies.shape[1])
        coef = (np.full(self.frequencies.shape[0], 1 / math.sqrt(self.frequencies.shape[0]))
                if self.amplitudes is None else self.amplitudes)
        out = np.empty((len(self), t.shape[0]))
        for i in range(len(self)):
            out[i] = _features(self.frequencies, coef, float(self.ell[i]), t) @ self.weights[i]
        return out


class _Adapter:
    """Robbins-Monro step adaptation on the log scale."""

    def __init__(self, step, target):
        self.log_step, self.target, self.t = math.log(step), target, 0

    @property
    def step(self):
        return math.exp(self.log_step)

    def update(self, accepted):
        self.t += 1
        self.log_step += (float(accepted) - self.target) / math.sqrt(self.t + 1)
        self.log_step = min(max(self.log_step, math.log(1e-4)), math.log(10.0))


def run_chain(config: ChainConfig, data: Dataset, setting: Setting,
              prior: Optional[BandwidthPrior] = None) -> Chain:
    """Systematic scan: weights, bandwidth, then sigma (regression).

    Reproducible from ``config.seed``.  Step sizes adapt during burn-in only.
    """
    d = data.d if data.n else getattr(prior, "d", 1)
    prior = GammaRootPrior(d=d) if prior is None else prior
    M = default_n_features(d) if config.n_features is None else config.n_features
    ss = np.random.SeedSequence(config.seed)
    init_seed, run_seed = ss.spawn(2)
    state = initial_state(M, init_seed, prior, setting, d, config.frequency_design,
                          config.a_init, config.sigma_init)
    rng = np.random.default_rng(run_seed)
    model = Model(data, setting, prior, state)
    regression = isinstance(setting, Regression)
    if config.weight_move == "gibbs" and not regression:
        raise ValueError("gibbs weight moves need the regression setting")
    ad_ell = _Adapter(config.step_ell, config.target_accept)
    ad_sig = _Adapter(config.step_sigma, config.target_accept)
    acc = {"bandwidth": [0, 0], "sigma": [0, 0]}
    total = config.burn_in + config.n_iter
    keep_w, keep_ell, keep_sig, keep_lp = [], [], [], []
    for it in range(total):
        burn = it < config.burn_in
        for _ in range(config.weight_steps):
            state = update_weights(state, data, setting, rng, config.weight_move, model)
        if not config.clamp_bandwidth:
            state, ok = update_bandwidth(state, data, setting, prior, rng, ad_ell.step,
                                         config.bandwidth_move, model)
            if burn:
                ad_ell.update(ok)
            else:
                acc["bandwidth"][0] += ok
                acc["bandwidth"][1] += 1
        if regression and not config.clamp_sigma:
            state, ok = update_sigma(state, data, setting, rng, ad_sig.step, prior, model)
            if burn:
                ad_sig.update(ok)
            else:
                acc["sigma"][0] += ok
                acc["sigma"][1] += 1
        if not burn and (it - config.burn_in) % config.thin == config.thin - 1:
            keep_w.append(state.weights)
            keep_ell.append(state.ell)
            keep_sig.append(state.sigma)
            keep_lp.append(model.log_post(state.weights, state.ell, state.sigma))
    if not keep_w:
        keep_w, keep_ell, keep_sig = [state.weights], [state.ell], [state.sigma]
        keep_lp = [model.log_post(state.weights, state.ell, state.sigma)]
    diag = {
        "acceptance_bandwidth": (acc["bandwidth"][0] / acc["bandwidth"][1]
                                 if acc["bandwidth"][1] else math.nan),
        "acceptance_sigma": acc["sigma"][0] / acc["sigma"][1] if acc["sigma"][1] else math.nan,
        "step_ell": ad_ell.step,
        "step_sigma": ad_sig.step if regression else math.nan,
        "n_features": M,
        "n_samples": len(keep_w),
        "seed": config.seed,
    }
    return Chain(state.frequencies, state.amplitudes, np.array(keep_w), np.array(keep_ell),
                 np.array(keep_sig, dtype=float) if regression else None,
                 np.array(keep_lp), diag, config)


# ---------------------------------------------------------------------------
# functionals and distances


def _transform(values, setting: Setting, grid: Optional[GridSpec]):
    if isinstance(setting, Density):
        if grid is None:
            raise ValueError("density transforms need the evaluation grid")
        lw = np.log(grid.trapezoid_weights())
        norm = special.logsumexp(values + lw, axis=-1, keepdims=True)
        return np.exp(values - norm)
    if isinstance(setting, Classification):
        return link(values, setting.link)
    return values


def posterior_functional(chain: Chain, grid: GridSpec, setting: Setting) -> tuple:
    """Posterior mean of the estimand on ``grid`` with 2.5% / 97.5% bands.

    Each draw is transformed first (normalised density, identity or link),
    then averaged.  Returns ``(mean, lower, upper)``.
    """
    vals = _transform(chain.values(grid.points()), setting, grid)
    return vals.mean(axis=0), np.quantile(vals, 0.025, axis=0), np.quantile(vals, 0.975, axis=0)


def hellinger(f, g, grid: Optional[GridSpec] = None, weights=None) -> float:
    """``(int (sqrt f - sqrt g)^2)^(1/2)`` by the grid's trapezoid rule."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    if np.any(f < 0) or np.any(g < 0):
        raise ValueError("densities must be nonnegative")
    if weights is None:
        weights = (grid or GridSpec((f.shape[-1],))).trapezoid_weights()
    sq = np.sum(weights * (np.sqrt(f) - np.sqrt(g)) ** 2, axis=-1)
    return np.sqrt(np.maximum(sq, 0.0))


def empirical_norm(values) -> float:
    """``(n^-1 sum_i w(t_i)^2)^(1/2)``."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] == 0:
        raise ValueError("empirical norm of an empty design")
    return np.sqrt(np.mean(v**2, axis=-1))


def l2g_norm(r1, r2, G=None, grid: Optional[GridSpec] = None) -> float:
    """``L2(G)`` distance between ``r1`` and ``r2``.

    ``r1``, ``r2`` are callables or value arrays.  ``G`` is ``None``
    (uniform on [0, 1]^d, trapezoid rule on ``grid``), a density callable
    (quadrature on ``grid``) or an array of sample points (empirical measure;
    then value arrays must be given at those points).
    """
    if G is not None and not callable(G):
        pts = np.asarray(G, dtype=float)
        a = r1(pts) if callable(r1) else np.asarray(r1)
        b = r2(pts) if callable(r2) else np.asarray(r2)
        return float(np.sqrt(np.mean((a - b) ** 2)))
    grid = GridSpec.dyadic(9) if grid is None else grid
    pts = grid.points()
    w = grid.trapezoid_weights()
    if G is not None:
        w = w * np.asarray(G(pts), dtype=float)
    a = r1(pts) if callable(r1) else np.asarray(r1)
    b = r2(pts) if callable(r2) else np.asarray(r2)
    return np.sqrt(np.sum(w * (a - b) ** 2, axis=-1))


def sample_distances(chain: Chain, truth, setting: Setting, data: Optional[Dataset] = None,
                     sigma0: Optional[float] = None, grid: Optional[GridSpec] = None) -> np.ndarray:
    """Setting-specific distance of every stored draw from the truth.

    Density: Hellinger between normalised densities on ``grid`` (truth is the
    log-density ``w0``).  Regression: ``|w - w0|_n + |sigma - sigma0|`` at the
    design.  Classification: ``L2(G)`` distance of ``link(w)`` and
    ``link(w0)``, G uniform.
    """
    d = chain.frequencies.shape[1]
    grid = quadrature_grid(d) if grid is None else grid
    if isinstance(setting, Regression):
        if data is None:
            raise ValueError("regression distances need the design")
        diff = chain.values(data.x) - truth(data.x)[None, :]
        out = empirical_norm(diff)
        if sigma0 is not None and chain.sigma is not None:
            out = out + np.abs(chain.sigma - sigma0)
        return out
    pts = grid.points()
    vals = _transform(chain.values(pts), setting, grid)
    ref = _transform(truth(pts)[None, :], setting, grid)
    if isinstance(setting, Density):
        return hellinger(vals, ref, grid)
    return l2g_norm(vals, ref, grid=grid)


def contraction_mass(chain: Chain, truth, radius: float, setting: Setting, **kw) -> float:
    """Fraction of posterior draws at distance greater than ``radius`` from the truth."""
    dist = sample_distances(chain, truth, setting, **kw)
    return float(np.mean(dist > radius))


def conjugate_oracle(data: Dataset, a: float, sigma: float, points=None) -> tuple:
    """Exact GP posterior for regression with ``A = a`` and ``sigma`` fixed.

    Returns the posterior mean and covariance of ``w`` at ``points``
    (default: the design), with kernel ``exp(-a^2 |s - t|^2)``.
    """
    x = data.x
    pts = x if points is None else _as_points(points, data.d)
    K = covariance_matrix(x, scale=a)
    Ks = covariance_matrix(pts, x, scale=a)
    Kss = covariance_matrix(pts, scale=a)
    L, _ = jittered_cholesky(K + sigma**2 * np.eye(x.shape[0]))
    alpha = linalg.cho_solve((L, True), data.y)
    mean = Ks @ alpha
    V = linalg.solve_triangular(L, Ks.T, lower=True)
    return mean, Kss - V.T @ V
