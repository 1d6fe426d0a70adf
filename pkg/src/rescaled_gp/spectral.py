"""Squared-exponential Gaussian field: covariance, spectral measure, sampling.

The field ``W`` on R^d has covariance ``E W_s W_t = exp(-|t - s|^2)``.  Its
spectral measure is the normal law N(0, 2 I) with density

    f(lam) = exp(-|lam|^2 / 4) / (2^d pi^(d/2)),

and the field rescaled by ``a`` (``t -> W_{a t}``) has spectral density
``f_a(lam) = a^-d f(lam / a)``.

Two realisations of the field are provided:

* :class:`GridPath` -- exact multivariate normal values on a tensor grid, used
  as ground truth for small-ball computations.
* :class:`FeatureExpansion` -- a random trigonometric expansion with
  frequencies drawn from the spectral measure.  It is defined on all of R^d,
  which is what rescaling needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

__all__ = [
    "covariance",
    "covariance_matrix",
    "spectral_density",
    "SpectralMeasure",
    "verify_bochner",
    "subexponential_moment",
    "DivergentQuadratureError",
    "FactorizationError",
    "GridSpec",
    "GridPath",
    "FeatureExpansion",
    "jittered_cholesky",
    "sample_points",
    "sample_grid",
    "sample_features",
    "hermite_frequencies",
    "rescale",
    "default_n_features",
]


class DivergentQuadratureError(ArithmeticError):
    """Raised when a spectral integral has not converged on its grid."""


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a covariance matrix cannot be factorised within the jitter budget."""


def _as_points(t, d: Optional[int] = None) -> np.ndarray:
    """Coerce ``t`` to an array of shape (n, d)."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = t.reshape(1, 1)
    elif t.ndim == 1:
        t = t[:, None] if d in (None, 1) else t[None, :]
    if d is not None and t.shape[-1] != d:
        raise ValueError(f"points have dimension {t.shape[-1]}, expected {d}")
    return t


def covariance(s, t, scale: float = 1.0):
    """Covariance ``exp(-scale^2 |t - s|^2)`` of the (rescaled) field.

    ``s`` and ``t`` are points or broadcastable stacks of points whose last
    axis is the coordinate axis.  Scalars are treated as points in R^1.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.ndim == 0:
        s = s[None]
    if t.ndim == 0:
        t = t[None]
    if s.shape[-1] != t.shape[-1]:
        raise ValueError(f"dimension mismatch: {s.shape[-1]} vs {t.shape[-1]}")
    sq = np.sum((t - s) ** 2, axis=-1)
    out = np.exp(-(scale**2) * sq)
    return float(out) if out.ndim == 0 else out


def covariance_matrix(x, y=None, scale: float = 1.0) -> np.ndarray:
    """Matrix ``K_ij = exp(-scale^2 |x_i - y_j|^2)`` for point sets (n, d), (m, d)."""
    x = _as_points(x)
    y = x if y is None else _as_points(y, x.shape[1])
    sq = (
        np.sum(x**2, axis=1)[:, None]
        + np.sum(y**2, axis=1)[None, :]
        - 2.0 * x @ y.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-(scale**2) * sq)


def spectral_density(lam, d: Optional[int] = None, scale: float = 1.0):
    """Spectral density ``f_a(lam) = a^-d exp(-|lam/a|^2/4) / (2^d pi^(d/2))``.

    ``lam`` is a point (last axis = coordinates) or a stack of points.  A
    scalar or 1-d array is read as frequencies in R^1 unless ``d`` says
    otherwise.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0 or (lam.ndim == 1 and d in (None, 1)):
        lam = lam[..., None]
    dim = lam.shape[-1]
    if d is not None and dim != d:
        raise ValueError(f"frequency has dimension {dim}, expected {d}")
    sq = np.sum((lam / scale) ** 2, axis=-1)
    out = np.exp(-sq / 4.0) / (2.0**dim * math.pi ** (dim / 2.0) * scale**dim)
    return float(out) if out.ndim == 0 else out


def _se_density(lam: np.ndarray) -> np.ndarray:
    return spectral_density(lam, d=lam.shape[-1])


@dataclass(frozen=True)
class SpectralMeasure:
    """Spectral measure at scale ``a`` together with a tensor quadrature grid.

    The grid is a uniform (trapezoidal) tensor grid centred at the origin.
    For the light-tailed, analytic integrands met here the trapezoid rule
    converges geometrically, and a uniform grid lets coefficient functions
    that are singular relative to ``f_a`` be integrated without forming
    ``f_a``-weighted node weights that underflow.

    Attributes
    ----------
    d : int
        Dimension.
    scale : float
        The rescaling ``a``.
    nodes : ndarray, shape (N, d)
        Frequency nodes.
    cell : ndarray, shape (N,)
        Lebesgue weights of the nodes (``spacing ** d``).
    density_values : ndarray, shape (N,)
        ``f_a`` at the nodes.
    spacing, half_width : float
        Node spacing and half-width of the grid per axis.
    """

    d: int
    scale: float
    nodes: np.ndarray
    cell: np.ndarray
    density_values: np.ndarray
    spacing: float
    half_width: float
    base_density: Callable[[np.ndarray], np.ndarray] = field(
        default=_se_density, repr=False, compare=False
    )

    @classmethod
    def build(
        cls,
        d: int = 1,
        scale: float = 1.0,
        n_per_axis: Optional[int] = None,
        half_width: Optional[float] = None,
        spacing: Optional[float] = None,
        density: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> "SpectralMeasure":
        """Uniform grid for the measure ``mu_a``.

        Defaults: half-width ``12 a`` per axis (about 8.5 standard deviations
        of N(0, 2 a^2)), 2048 nodes per axis for d=1, 128 for d=2 and 32 for
        d=3.  Giving ``spacing`` fixes the node spacing instead of the count;
        nodes then sit at integer multiples of ``spacing``.
        """
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if scale <= 0:
            raise ValueError("scale must be positive")
        if half_width is None:
            half_width = 12.0 * scale
        if spacing is None:
            if n_per_axis is None:
                n_per_axis = {1: 2048, 2: 128}.get(d, 32)
            if n_per_axis < 2:
                raise ValueError("need at least 2 nodes per axis")
            axis = np.linspace(-half_width, half_width, n_per_axis)
            spacing = axis[1] - axis[0]
        else:
            k = int(math.ceil(half_width / spacing - 1e-9))
            axis = spacing * np.arange(-k, k + 1)
            half_width = k * spacing
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        base = _se_density if density is None else density
        fa = base(nodes / scale) / scale**d
        if np.any(fa <= 0):
            raise ValueError("spectral density must be positive on the grid")
        cell = np.full(nodes.shape[0], spacing**d)
        return cls(d, float(scale), nodes, cell, fa, float(spacing), float(half_width), base)

    @property
    def weights(self) -> np.ndarray:
        """Measure weights ``f_a(lam_j) * cell_j``."""
        return self.density_values * self.cell

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def rescaled(self, scale: float) -> "SpectralMeasure":
        """Same grid shape mapped to scale ``scale`` (nodes multiplied by scale/a)."""
        r = scale / self.scale
        nodes = self.nodes * r
        fa = self.base_density(nodes / scale) / scale**self.d
        return SpectralMeasure(
            self.d, float(scale), nodes, self.cell * r**self.d, fa,
            self.spacing * r, self.half_width * r, self.base_density,
        )

    def integrate(self, values) -> complex:
        """``int values dmu_a`` for values sampled at the nodes."""
        return np.sum(np.asarray(values) * self.weights)

    def moment(self, power: int = 2) -> float:
        """``int |lam|^power dmu_a``."""
        r = np.linalg.norm(self.nodes, axis=1)
        return float(np.sum(r**power * self.weights))


def verify_bochner(t, quadrature: SpectralMeasure) -> float:
    """Residual ``|cov(0, t) - Re int exp(-i <lam, t>) dmu(lam)|``.

    The quadrature must be at scale 1; ``t`` is a single point.
    """
    if not math.isclose(quadrature.scale, 1.0):
        raise ValueError("verify_bochner needs the scale-1 measure")
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size != quadrature.d:
        raise ValueError(f"dimension mismatch: {t.size} vs {quadrature.d}")
    phase = quadrature.nodes @ t
    integral = np.sum(np.cos(phase) * quadrature.weights)
    return abs(covariance(np.zeros_like(t), t) - float(integral))


def subexponential_moment(
    delta: float, measure: SpectralMeasure, rtol: float = 1e-10
) -> float:
    """``int exp(delta |lam|) mu_a(dlam)`` by quadrature.

    Raises :class:`DivergentQuadratureError` if the integrand has not decayed
    at the edge of the grid, which is what a measure without sub-exponential
    tails looks like.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = np.linalg.norm(measure.nodes, axis=1)
    with np.errstate(over="ignore"):
        log_terms = delta * r + np.log(measure.weights)
    peak = np.max(log_terms)
    terms = np.exp(log_terms - peak)
    total = np.sum(terms)
    edge = r >= (measure.half_width - 1.5 * measure.spacing)
    if not np.isfinite(peak) or np.max(terms[edge]) > rtol * total:
        raise DivergentQuadratureError(
            f"exp({delta}|lam|) is not negligible at the grid edge "
            f"|lam| = {measure.half_width:.3g}"
        )
    return float(total * math.exp(peak))


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid of nodes on [0, 1]^d, ``counts[i]`` equispaced nodes on axis i."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValueError("grid needs at least one axis")
        if any(c < 2 for c in counts):
            raise ValueError("need at least 2 nodes per axis")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, n: int, d: int = 1) -> "GridSpec":
        return cls((n,) * d)

    @classmethod
    def dyadic(cls, k: int, d: int = 1) -> "GridSpec":
        """``2^k + 1`` nodes per axis."""
        return cls((2**k + 1,) * d)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axes(self) -> list:
        return [np.linspace(0.0, 1.0, c) for c in self.counts]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor trapezoid weights on [0, 1]^d (they sum to one)."""
        w = np.ones(1)
        for c in self.counts:
            w1 = np.full(c, 1.0 / (c - 1))
            w1[[0, -1]] *= 0.5
            w = np.multiply.outer(w, w1).ravel()
        return w


@dataclass(frozen=True)
class GridPath:
    """Values of the field at the nodes of ``grid`` (C order, last axis fastest)."""

    grid: GridSpec
    values: np.ndarray
    scale: float = 1.0
    jitter: float = 0.0

    def as_table(self) -> np.ndarray:
        """Array with columns ``t_1 .. t_d, value``."""
        return np.column_stack([self.grid.points(), self.values])


@dataclass(frozen=True)
class FeatureExpansion:
    """Random trigonometric expansion of the field.

    ``W(t) = sum_j c_j (z_j cos(a <lam_j, t>) + z'_j sin(a <lam_j, t>))``

    with ``lam_j`` drawn from the normalised spectral measure N(0, 2 I) and
    ``c_j = M^-1/2``.  Its covariance is ``M^-1 sum_j cos(a <lam_j, t - s>)``,
    exactly 1 on the diagonal and converging to the squared-exponential
    kernel as M grows.  Deterministic quadrature designs set ``c_j`` to the
    square roots of the quadrature weights.
    """

    frequencies: np.ndarray
    cos_weights: np.ndarray
    sin_weights: np.ndarray
    scale: float = 1.0
    amplitudes: Optional[np.ndarray] = None

    @property
    def coefficients(self) -> np.ndarray:
        """The ``c_j`` above."""
        if self.amplitudes is None:
            return np.full(self.n_features, 1.0 / math.sqrt(self.n_features))
        return self.amplitudes

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    @property
    def n_features(self) -> int:
        return self.frequencies.shape[0]

    def features(self, t) -> tuple:
        """``(cos, sin)`` feature matrices of shape (n, M) at points ``t``."""
        t = _as_points(t, self.d)
        phase = (self.scale * t) @ self.frequencies.T
        return np.cos(phase), np.sin(phase)

    def __call__(self, t) -> np.ndarray:
        c, s = self.features(t)
        amp = self.coefficients
        return c @ (amp * self.cos_weights) + s @ (amp * self.sin_weights)


def default_n_features(d: int) -> int:
    return 256 * d


def jittered_cholesky(
    K: np.ndarray, start: float = 1e-10, stop: float = 1e-6, factor: float = 10.0
) -> tuple:
    """Lower Cholesky factor of ``K + jitter * max(diag K) * I``.

    The relative jitter starts at ``start`` and grows by ``factor`` until the
    factorisation succeeds or exceeds ``stop``.

    Returns
    -------
    (L, jitter) where ``jitter`` is the absolute amount added to the diagonal.
    """
    scale = float(np.max(np.diag(K)))
    rel = start
    while rel <= stop * (1 + 1e-12):
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(K.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            rel *= factor
    raise FactorizationError(
        f"covariance matrix not factorisable with relative jitter up to {stop:g}"
    )


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_points(points, seed, scale: float = 1.0, size: Optional[int] = None):
    """Exact draw(s) of ``W(scale * t)`` at arbitrary points ``t``.

    Returns an array of shape (n,) or, with ``size``, (size, n).
    """
    pts = _as_points(points)
    L, _ = jittered_cholesky(covariance_matrix(pts, scale=scale))
    rng = _rng(seed)
    z = rng.standard_normal(pts.shape[0] if size is None else (size, pts.shape[0]))
    return L @ z if size is None else z @ L.T


def sample_grid(grid: GridSpec, seed, scale: float = 1.0) -> GridPath:
    """Exact multivariate normal draw of the field on ``grid``."""
    pts = grid.points()
    L, jitter = jittered_cholesky(covariance_matrix(pts, scale=scale))
    z = _rng(seed).standard_normal(pts.shape[0])
    return GridPath(grid, L @ z, float(scale), jitter)


def hermite_frequencies(n_features: int, d: int = 1) -> tuple:
    """Gauss-Hermite nodes and weights for N(0, 2 I).

    Only the nonnegative half-line is kept on the first axis (the cosine and
    sine pair already covers ``-lam``), so the kernel
    ``sum_j w_j cos(<lam_j, u>)`` equals ``exp(-|u|^2)`` up to quadrature error.
    ``n_features`` is rounded to ``m * k^(d-1)`` with ``k`` nodes on later axes.
    """
    k = max(2, int(round(n_features ** (1.0 / d)))) if d > 1 else n_features
    m = max(1, n_features // k ** (d - 1))
    x, w = np.polynomial.hermite.hermgauss(2 * m)
    half_x, half_w = 2.0 * x[m:], 2.0 * w[m:] / math.sqrt(math.pi)
    axes_x, axes_w = [half_x], [half_w]
    if d > 1:
        xf, wf = np.polynomial.hermite.hermgauss(k)
        axes_x += [2.0 * xf] * (d - 1)
        axes_w += [wf / math.sqrt(math.pi)] * (d - 1)
    mesh = np.meshgrid(*axes_x, indexing="ij")
    wmesh = np.meshgrid(*axes_w, indexing="ij")
    lam = np.stack([g.ravel() for g in mesh], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=1), axis=1)
    return lam, weights


def sample_features(
    n_features: int, seed, d: int = 1, scale: float = 1.0, design: str = "random"
) -> FeatureExpansion:
    """Draw a :class:`FeatureExpansion` with ``n_features`` frequency pairs.

    ``design="random"`` draws the frequencies from N(0, 2 I);
    ``design="hermite"`` uses fixed Gauss-Hermite frequencies, for which the
    expansion's covariance matches the squared-exponential kernel to
    quadrature accuracy on bounded ranges.
    """
    if n_features < 1:
        raise ValueError("need at least one feature")
    rng = _rng(seed)
    if design == "random":
        lam = math.sqrt(2.0) * rng.standard_normal((n_features, d))
        amp = None
    elif design == "hermite":
        lam, w = hermite_frequencies(n_features, d)
        amp = np.sqrt(w)
    else:
        raise ValueError(f"unknown frequency design {design!r}")
    m = lam.shape[0]
    z = rng.standard_normal(m)
    zp = rng.standard_normal(m)
    return FeatureExpansion(lam, z, zp, float(scale), amp)


def rescale(fld, a: float):
    """The field ``t -> W(a t)``.

    Only feature expansions can be rescaled in place, since ``W(a t)`` needs
    the field outside the original grid; grid paths must be re-sampled with
    ``sample_grid(grid, seed, scale=a)``.
    """
    if not a > 0:
        raise ValueError("rescaling factor must be positive")
    if isinstance(fld, GridPath):
        raise TypeError("grid paths cannot be rescaled; re-sample with scale=a")
    return FeatureExpansion(fld.frequencies, fld.cos_weights, fld.sin_weights, fld.scale * a,
                            fld.amplitudes)
