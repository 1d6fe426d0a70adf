"""Truth functions with known smoothness and their Fourier transforms.

Fourier convention: ``w_hat(lam) = (2 pi)^-d int exp(i <lam, t>) w(t) dt`` so
that ``w(t) = int exp(-i <lam, t>) w_hat(lam) dlam``.

Trigonometric truths (Weierstrass sums, cosines) have no square-integrable
transform on R^d.  They are stored as atoms ``w(t) = Re sum_k c_k exp(i <omega_k, t>)``
and, where a transform is needed, multiplied by a smooth window that equals one
on a neighbourhood of [0, 1]^d.  The windowed function is a compactly supported
extension of the truth with the same smoothness, which is all the convolution
approximants need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "Holder",
    "Analytic",
    "TruthFunction",
    "SmoothWindow",
    "smooth_step",
    "make_truth",
    "TRUTH_IDS",
    "holder_quotient",
]


@dataclass(frozen=True)
class Holder:
    alpha: float


@dataclass(frozen=True)
class Analytic:
    gamma: float
    r: float


Smoothness = Union[Holder, Analytic, None]


def smooth_step(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1, all derivatives flat at both ends."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        left = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
        right = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    return left / (left + right)


@dataclass(frozen=True)
class SmoothWindow:
    """Tensor window equal to 1 on ``[-margin, 1 + margin]^d`` and 0 outside
    ``[-margin - taper, 1 + margin + taper]^d``."""

    margin: float = 4.0
    taper: float = 2.0
    n_gauss: int = 256

    @property
    def half_flat(self) -> float:
        return 0.5 + self.margin

    @property
    def half_support(self) -> float:
        return 0.5 + self.margin + self.taper

    def profile(self, u):
        """Centred 1-d profile as a function of ``u = t - 1/2``."""
        u = np.abs(np.asarray(u, dtype=float))
        return 1.0 - smooth_step((u - self.half_flat) / self.taper)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        return np.prod(self.profile(t - 0.5), axis=-1)

    def hat_1d(self, lam) -> np.ndarray:
        """``(2 pi)^-1 int exp(i lam t) chi(t) dt`` for the 1-d window."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(lam.shape, dtype=complex)
        live = np.abs(lam) <= self.cutoff
        if np.any(live):
            out[live] = self._hat_1d(lam[live])
        return out

    @property
    def cutoff(self) -> float:
        """Beyond this frequency the transform is below roundoff and is set to 0."""
        return 600.0 / self.taper

    def _hat_1d(self, lam):
        L, tau = self.half_flat, self.taper
        # number of Gauss nodes grows with the oscillation count over the taper
        n = max(self.n_gauss, int(4 * np.max(np.abs(lam), initial=0.0) * tau / math.pi) + 64)
        x, wx = np.polynomial.legendre.leggauss(n)
        u = L + tau * (x + 1) / 2
        wu = wx * tau / 2
        prof = 1.0 - smooth_step((u - L) / tau)
        flat = np.where(np.abs(lam) < 1e-12, L, np.sin(lam * L) / np.where(lam == 0, 1.0, lam))
        taper_part = np.cos(np.multiply.outer(lam, u)) @ (prof * wu)
        even = 2.0 * (flat + taper_part)
        return np.exp(0.5j * lam) * even / (2.0 * math.pi)

    def hat(self, lam) -> np.ndarray:
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        out = np.ones(lam.shape[0], dtype=complex)
        for i in range(lam.shape[1]):
            out = out * self.hat_1d(lam[:, i])
        return out


@dataclass(frozen=True)
class TruthFunction:
    """A function on R^d with a smoothness certificate.

    Exactly one of ``fourier`` (closed-form transform) or ``atoms``
    (``(omega, c)`` with ``omega`` of shape (K, d) and complex ``c``) is
    normally set.  ``evaluator`` maps an (n, d) array to (n,) values.
    """

    name: str
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    smoothness: Smoothness = None
    fourier: Optional[Callable[[np.ndarray], np.ndarray]] = None
    atoms: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim <= 1:
            t = t.reshape(-1, self.d) if self.d > 1 else t.reshape(-1, 1)
        return self.evaluator(t)

    @property
    def has_transform(self) -> bool:
        return self.fourier is not None or self.atoms is not None

    def transform(self, lam, window: Optional[SmoothWindow] = None) -> np.ndarray:
        """Fourier transform at frequencies ``lam`` (shape (N, d)).

        Closed forms are used when available; trigonometric truths are
        windowed first.  Raises ``ValueError`` when neither exists.
        """
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        if self.fourier is not None:
            return self.fourier(lam)
        if self.atoms is not None:
            win = SmoothWindow() if window is None else window
            omega, coef = self.atoms
            out = np.zeros(lam.shape[0], dtype=complex)
            for om, c in zip(omega, coef):
                out += 0.5 * (c * win.hat(lam + om) + np.conj(c) * win.hat(lam - om))
            return out
        raise ValueError(f"truth {self.name!r} has no available Fourier transform")

    def windowed(self, t, window: Optional[SmoothWindow] = None) -> np.ndarray:
        """The extension whose transform :meth:`transform` returns."""
        vals = self(t)
        if self.fourier is not None:
            return vals
        win = SmoothWindow() if window is None else window
        return vals * win(np.atleast_2d(t) if self.d > 1 else np.reshape(t, (-1, 1)))


def _atom_truth(name, d, omega, coef, smoothness, params) -> TruthFunction:
    omega = np.asarray(omega, dtype=float).reshape(-1, d)
    coef = np.asarray(coef, dtype=complex)

    def ev(t):
        return np.real(np.exp(1j * (t @ omega.T)) @ coef)

    return TruthFunction(name, d, ev, smoothness, None, (omega, coef), dict(params))


def _weierstrass_atoms(alpha, d, K, seed, n_antider=0):
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=K + 1)
    if d == 1:
        dirs = np.ones((K + 1, 1))
    else:
        dirs = rng.standard_normal((K + 1, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    k = np.arange(K + 1)
    freq = (2.0**k * 2.0 * math.pi)[:, None] * dirs
    amp = 2.0 ** (-k * alpha) * (2.0 * math.pi) ** (-n_antider)
    coef = amp * np.exp(1j * (phases - n_antider * math.pi / 2))
    return freq, coef


def make_truth(id: str, **params) -> TruthFunction:
    """Build a truth function by identifier.

    Identifiers and parameters:

    ``weierstrass``: alpha (0 < alpha <= 1), d=1, K=12, seed=0.
        ``sum_{k<=K} 2^-k alpha cos(2^k 2 pi <u_k, t> + phi_k)`` with fixed
        random phases (and unit directions ``u_k`` for d > 1).
    ``smoothed-weierstrass``: alpha >= 1, d=1, K=12, seed=0.
        A Weierstrass sum of order ``alpha - m`` in (0, 1] integrated ``m``
        times, ``m = ceil(alpha) - 1``.
    ``gaussian-bump``: width=0.3, center=0.5, height=1.0, d=1.
        ``height * exp(-|t - center|^2 / width^2)``; member of the analytic
        class with r = 2 for any gamma < width^2 / 2.
    ``sech``: width=0.2, center=0.5, height=1.0, d=1.
        Product of ``sech((t_i - center) / width)``; transform decays like
        ``exp(-pi width |lam| / 2)``, so r = 1.
    ``cosine``: k=1, d=1.  ``cos(2 pi k sum_i t_i)``.
    ``band-limited``: center=0.5, height=1.0, d=1.
        Transform ``height prod_i b(2 lam_i) / (2 pi)`` (times a phase), with
        ``b`` the flat-top bump; supported in [-1, 1]^d.
    ``zero``: d=1.
    """
    d = int(params.pop("d", 1))
    if id == "weierstrass":
        alpha = float(params.pop("alpha"))
        if not 0 < alpha <= 1:
            raise ValueError("weierstrass needs 0 < alpha <= 1; use smoothed-weierstrass")
        K, seed = int(params.pop("K", 12)), int(params.pop("seed", 0))
        _no_extra(id, params)
        freq, coef = _weierstrass_atoms(alpha, d, K, seed)
        return _atom_truth(id, d, freq, coef, Holder(alpha),
                           dict(alpha=alpha, K=K, seed=seed, d=d))
    if id == "smoothed-weierstrass":
        alpha = float(params.pop("alpha"))
        if alpha < 1:
            raise ValueError("smoothed-weierstrass needs alpha >= 1")
        K, seed = int(params.pop("K", 12)), int(params.pop("seed", 0))
        _no_extra(id, params)
        m = int(math.ceil(alpha)) - 1
        freq, coef = _weierstrass_atoms(alpha, d, K, seed, n_antider=m)
        return _atom_truth(id, d, freq, coef, Holder(alpha),
                           dict(alpha=alpha, K=K, seed=seed, d=d))
    if id == "gaussian-bump":
        width = float(params.pop("width", 0.3))
        center = float(params.pop("center", 0.5))
        height = float(params.pop("height", 1.0))
        _no_extra(id, params)
        c = np.full(d, center)

        def ev(t):
            return height * np.exp(-np.sum((t - c) ** 2, axis=1) / width**2)

        def ft(lam):
            sq = np.sum(lam**2, axis=1)
            const = height * (math.sqrt(math.pi) * width / (2 * math.pi)) ** d
            return const * np.exp(1j * (lam @ c)) * np.exp(-(width**2) * sq / 4.0)

        return TruthFunction(id, d, ev, Analytic(gamma=width**2 / 4.0, r=2.0), ft, None,
                             dict(width=width, center=center, height=height, d=d))
    if id == "sech":
        width = float(params.pop("width", 0.2))
        center = float(params.pop("center", 0.5))
        height = float(params.pop("height", 1.0))
        _no_extra(id, params)

        def ev(t):
            return height * np.prod(1.0 / np.cosh((t - center) / width), axis=1)

        def ft(lam):
            one = 0.5 * width / np.cosh(math.pi * width * lam / 2.0)
            return height * np.prod(one, axis=1) * np.exp(1j * center * np.sum(lam, axis=1))

        return TruthFunction(id, d, ev, Analytic(gamma=math.pi * width / 2.0, r=1.0), ft, None,
                             dict(width=width, center=center, height=height, d=d))
    if id == "cosine":
        k = float(params.pop("k", 1))
        _no_extra(id, params)
        freq = np.full((1, d), 2.0 * math.pi * k)
        return _atom_truth(id, d, freq, [1.0 + 0j], Analytic(gamma=math.inf, r=math.inf),
                           dict(k=k, d=d))
    if id == "band-limited":
        center = float(params.pop("center", 0.5))
        height = float(params.pop("height", 1.0))
        _no_extra(id, params)

        def ev(t):
            return height * np.prod(0.5 * _bump_kernel_1d(0.5 * (t - center)), axis=1)

        def ft(lam):
            one = (1.0 - smooth_step(np.abs(2.0 * lam) - 1.0)) / (2.0 * math.pi)
            return height * np.prod(one, axis=1) * np.exp(1j * center * np.sum(lam, axis=1))

        return TruthFunction(id, d, ev, Analytic(gamma=math.inf, r=math.inf), ft, None,
                             dict(center=center, height=height, d=d))
    if id == "zero":
        _no_extra(id, params)
        return TruthFunction(id, d, lambda t: np.zeros(t.shape[0]),
                             Analytic(gamma=math.inf, r=math.inf),
                             lambda lam: np.zeros(lam.shape[0], dtype=complex), None, dict(d=d))
    raise ValueError(f"unknown truth id {id!r}; expected one of {TRUTH_IDS}")


TRUTH_IDS = ("weierstrass", "smoothed-weierstrass", "gaussian-bump", "sech", "cosine",
             "band-limited", "zero")


def _bump_kernel_1d(u, n_gauss: int = 400) -> np.ndarray:
    """``(1/pi) int_0^2 b(x) cos(x u) dx`` with ``b = 1 - smooth_step(|x| - 1)``."""
    u = np.asarray(u, dtype=float)
    n = max(n_gauss, int(np.max(np.abs(u), initial=0.0) / math.pi) + 64)
    x, wx = np.polynomial.legendre.leggauss(n)
    xs, ws = 1.0 + (x + 1) / 2, wx / 2
    safe = np.where(u == 0, 1.0, u)
    flat = np.where(u == 0, 1.0, np.sin(u) / safe)
    taper = np.cos(np.multiply.outer(u, xs)) @ ((1.0 - smooth_step(xs - 1.0)) * ws)
    return (flat + taper) / math.pi


def _no_extra(id, params):
    if params:
        raise ValueError(f"unknown parameter(s) for {id}: {sorted(params)}")


def holder_quotient(w: TruthFunction, alpha: float, level: int, n_base: int = 64) -> float:
    """Max of ``|w(s) - w(t)| / |s - t|^alpha`` over neighbouring dyadic points
    at spacing ``2^-level`` (d = 1), sampled at ``n_base`` offsets per scale."""
    h = 2.0**-level
    s = np.linspace(0.0, 1.0 - h, n_base)
    diff = np.abs(w(s + h) - w(s))
    return float(np.max(diff) / h**alpha)
