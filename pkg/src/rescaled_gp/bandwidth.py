"""Priors for the rescaling variable ``A``.

The density ``g`` of ``A`` is required to satisfy, for large ``a``,

    C1 a^p exp(-D1 a^d log^q a) <= g(a) <= C2 a^p exp(-D2 a^d log^q a).

:class:`GammaRootPrior` (``A^d ~ Gamma(k, rate=beta)``) meets this with
``q = 0``.  :class:`EnvelopePrior` covers ``q > 0`` with a numerically
normalised density and an inverse-CDF sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "EnvelopeParams",
    "EnvelopeReport",
    "EnvelopeViolation",
    "BandwidthPrior",
    "GammaRootPrior",
    "EnvelopePrior",
    "tail_bound",
    "envelope_check",
]


class EnvelopeViolation(AssertionError):
    """The density left its envelope at some grid point."""


@dataclass(frozen=True)
class EnvelopeParams:
    d: int
    p: float
    q: float
    C1: float
    D1: float
    C2: float
    D2: float
    a_min: float = math.e

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("p and q must be nonnegative")
        if min(self.C1, self.C2, self.D1, self.D2) <= 0:
            raise ValueError("C1, C2, D1, D2 must be positive")
        if self.C1 > self.C2 or self.D2 > self.D1:
            raise ValueError("need C1 <= C2 and D2 <= D1")

    def _log_shape(self, a, C, D):
        a = np.asarray(a, dtype=float)
        return math.log(C) + self.p * np.log(a) - D * a**self.d * np.log(a) ** self.q

    def log_lower(self, a):
        return self._log_shape(a, self.C1, self.D1)

    def log_upper(self, a):
        return self._log_shape(a, self.C2, self.D2)


class BandwidthPrior:
    """Common interface: ``log_density``, ``cdf``, ``sample``, ``median``, ``envelope``."""

    d: int

    def log_density(self, a):
        raise NotImplementedError

    def density(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a <= 0):
            raise ValueError("bandwidth must be positive")
        out = np.exp(self.log_density(a))
        return float(out) if out.ndim == 0 else out

    def cdf(self, a):
        raise NotImplementedError

    def sf(self, a):
        return 1.0 - self.cdf(a)

    def sample(self, seed, size=None):
        raise NotImplementedError

    def median(self) -> float:
        raise NotImplementedError

    @property
    def envelope(self) -> EnvelopeParams:
        raise NotImplementedError

    def log_density_log_scale(self, ell):
        """Log density of ``log A`` at ``ell`` (includes the Jacobian ``e^ell``)."""
        ell = np.asarray(ell, dtype=float)
        return self.log_density(np.exp(ell)) + ell


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GammaRootPrior(BandwidthPrior):
    """``A = G^(1/d)`` with ``G ~ Gamma(shape, rate)``.

    Density ``g(a) = d rate^shape / Gamma(shape) a^(d shape - 1) exp(-rate a^d)``.
    """

    d: int = 1
    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("Gamma shape and rate must be positive")

    @property
    def log_const(self) -> float:
        return math.log(self.d) + self.shape * math.log(self.rate) - special.gammaln(self.shape)

    def log_density(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.log_const + (self.d * self.shape - 1) * np.log(a) - self.rate * a**self.d
        return np.where(a > 0, out, -np.inf)

    def cdf(self, a):
        a = np.maximum(np.asarray(a, dtype=float), 0.0)
        return special.gammainc(self.shape, self.rate * a**self.d)

    def sf(self, a):
        a = np.maximum(np.asarray(a, dtype=float), 0.0)
        return special.gammaincc(self.shape, self.rate * a**self.d)

    def sample(self, seed, size=None):
        g = _rng(seed).gamma(self.shape, 1.0 / self.rate, size=size)
        return g ** (1.0 / self.d)

    def median(self) -> float:
        return float((special.gammaincinv(self.shape, 0.5) / self.rate) ** (1.0 / self.d))

    @property
    def envelope(self) -> EnvelopeParams:
        c = math.exp(self.log_const)
        return EnvelopeParams(
            d=self.d, p=self.d * self.shape - 1, q=0.0, C1=c, D1=self.rate, C2=c, D2=self.rate
        )


class EnvelopePrior(BandwidthPrior):
    """Density proportional to ``a^p exp(-D a^d max(log a, 1)^q)`` on (0, inf).

    For ``a >= e`` the shape is exactly the envelope with ``D1 = D2 = D``.
    The normalising constant is found by adaptive quadrature and sampling
    inverts a tabulated CDF.
    """

    def __init__(self, d: int = 1, p: float = 0.0, q: float = 0.0, D: float = 1.0,
                 n_table: int = 4097):
        if d < 1 or p < 0 or q < 0 or D <= 0:
            raise ValueError("need d >= 1, p >= 0, q >= 0, D > 0")
        self.d, self.p, self.q, self.D = d, float(p), float(q), float(D)
        # upper end where the unnormalised density is below exp(-745)
        hi = 1.0
        while self._log_shape(hi) > -745.0 or hi < 10.0:
            hi *= 1.5
        self._hi = hi
        mass, _ = integrate.quad(lambda a: math.exp(self._log_shape(a)), 0.0, hi,
                                 limit=500, epsabs=0.0, epsrel=1e-12)
        self.log_norm = -math.log(mass)
        grid = np.linspace(0.0, hi, n_table)
        dens = np.exp(self.log_density(np.maximum(grid, 1e-300)))
        dens[0] = 0.0 if self.p > 0 else dens[1]
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        self._grid, self._cdf = grid, cdf / cdf[-1]

    def _log_shape(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore"):
            la = np.log(a)
        return self.p * la - self.D * a**self.d * np.maximum(la, 1.0) ** self.q

    def log_density(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.log_norm + self._log_shape(a)
        return np.where(a > 0, out, -np.inf)

    def cdf(self, a):
        return np.interp(a, self._grid, self._cdf)

    def sample(self, seed, size=None):
        u = _rng(seed).uniform(size=size)
        return np.interp(u, self._cdf, self._grid)

    def median(self) -> float:
        return float(np.interp(0.5, self._cdf, self._grid))

    @property
    def envelope(self) -> EnvelopeParams:
        c = math.exp(self.log_norm)
        return EnvelopeParams(d=self.d, p=self.p, q=self.q, C1=c, D1=self.D, C2=c, D2=self.D)


def tail_bound(prior, a: float) -> float:
    """Upper bound on ``P(A > a)`` from the envelope's upper half.

    ``2 C2 a^(p-d+1) exp(-D2 a^d log^q a) / (D2 d log^q a)``, asserted for
    ``a > e`` and ``a^d log^q a > 2 |p - d + 1| / (D2 d)``.  ``prior`` may be
    a :class:`BandwidthPrior` or an :class:`EnvelopeParams`.
    """
    env = prior if isinstance(prior, EnvelopeParams) else prior.envelope
    d, p, q = env.d, env.p, env.q
    if not a > math.e:
        raise ValueError(f"tail bound needs a > e, got {a}")
    la = math.log(a)
    if not a**d * la**q > 2.0 * abs(p - d + 1) / (env.D2 * d):
        raise ValueError("tail bound threshold a^d log^q a > 2|p-d+1|/(D2 d) not met")
    log_b = (math.log(2.0 * env.C2) + (p - d + 1) * la - env.D2 * a**d * la**q
             - math.log(env.D2 * d) - q * math.log(la))
    return math.exp(log_b)


@dataclass(frozen=True)
class EnvelopeReport:
    a_grid: np.ndarray
    lower_slack: np.ndarray   # log g - log lower
    upper_slack: np.ndarray   # log upper - log g

    @property
    def min_slack(self) -> float:
        return float(min(self.lower_slack.min(), self.upper_slack.min()))

    @property
    def max_slack(self) -> float:
        return float(max(self.lower_slack.max(), self.upper_slack.max()))


def envelope_check(prior: BandwidthPrior, a_grid: Sequence[float],
                   envelope: Optional[EnvelopeParams] = None,
                   tol: float = 1e-10) -> EnvelopeReport:
    """Check the two-sided envelope at every ``a`` in ``a_grid`` (log scale).

    Raises :class:`EnvelopeViolation` at the first point where either side
    fails by more than ``tol`` in log-density.
    """
    env = prior.envelope if envelope is None else envelope
    a = np.asarray(a_grid, dtype=float)
    if np.any(a < env.a_min):
        raise ValueError(f"envelope asserted only for a >= {env.a_min:g}")
    lg = prior.log_density(a)
    lo = lg - env.log_lower(a)
    up = env.log_upper(a) - lg
    bad = (lo < -tol) | (up < -tol)
    if np.any(bad):
        i = int(np.argmax(bad))
        side = "lower" if lo[i] < -tol else "upper"
        raise EnvelopeViolation(f"{side} envelope violated at a = {a[i]:g}")
    return EnvelopeReport(a, lo, up)
