"""RKHS of the rescaled field and the bounds that control its prior mass.

An element of the RKHS ``H^a`` of ``t -> W_{a t}`` is written as

    h(t) = Re int exp(i <lam, t>) psi(lam) mu_a(dlam),   |h|_{H^a} = |psi|_{L2(mu_a)},

with ``psi`` stored on the nodes of a :class:`~rescaled_gp.spectral.SpectralMeasure`.
Every integral below is a sum over those nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .spectral import (
    GridSpec,
    SpectralMeasure,
    covariance_matrix,
    jittered_cholesky,
    _as_points,
    _rng,
)
from .truths import Analytic, Holder, SmoothWindow, TruthFunction, smooth_step

__all__ = [
    "RkhsElement",
    "HigherOrderKernel",
    "rkhs_evaluate",
    "rkhs_norm",
    "kernel_section",
    "random_unit_ball",
    "sup_grid",
    "scaling_isometry_check",
    "approximant_measure",
    "holder_approximant",
    "analytic_membership",
    "analytic_approximant",
    "NoApproximantError",
    "entropy_bound",
    "greedy_packing",
    "SmallBallEstimate",
    "SmallBallError",
    "small_ball_exponent",
    "NestingReport",
    "nesting_check",
    "PointwiseReport",
    "unit_ball_pointwise_check",
    "ConcentrationReport",
    "concentration_function",
    "shifted_ball_check",
    "normal_quantile_checks",
]


class RkhsElement:
    """``psi`` on the nodes of ``measure`` (complex array of shape (N,))."""

    def __init__(self, measure: SpectralMeasure, psi):
        psi = np.broadcast_to(np.asarray(psi, dtype=complex), (measure.nodes.shape[0],))
        self.measure = measure
        self.psi = np.array(psi)
        self._sq_norm = None

    @property
    def scale(self) -> float:
        return self.measure.scale

    @property
    def d(self) -> int:
        return self.measure.d

    @property
    def sq_norm(self) -> float:
        if self._sq_norm is None:
            self._sq_norm = float(np.sum(np.abs(self.psi) ** 2 * self.measure.weights))
        return self._sq_norm

    @property
    def norm(self) -> float:
        return math.sqrt(self.sq_norm)

    def __call__(self, t, chunk: int = 2048) -> np.ndarray:
        t = _as_points(t, self.d)
        c = self.psi * self.measure.weights
        out = np.empty(t.shape[0])
        for i in range(0, t.shape[0], chunk):
            phase = t[i:i + chunk] @ self.measure.nodes.T
            out[i:i + chunk] = np.cos(phase) @ c.real - np.sin(phase) @ c.imag
        return out

    def _check(self, other):
        if other.measure is not self.measure and not (
            other.measure.nodes.shape == self.measure.nodes.shape
            and np.allclose(other.measure.nodes, self.measure.nodes)
            and math.isclose(other.scale, self.scale)
        ):
            raise ValueError("elements live on different quadrature grids")

    def __add__(self, other: "RkhsElement") -> "RkhsElement":
        self._check(other)
        return RkhsElement(self.measure, self.psi + other.psi)

    def __sub__(self, other: "RkhsElement") -> "RkhsElement":
        self._check(other)
        return RkhsElement(self.measure, self.psi - other.psi)

    def __mul__(self, c) -> "RkhsElement":
        return RkhsElement(self.measure, c * self.psi)

    __rmul__ = __mul__

    def normalized(self) -> "RkhsElement":
        return self * (1.0 / self.norm)


def rkhs_evaluate(h: RkhsElement, t) -> np.ndarray:
    return h(t)


def rkhs_norm(h: RkhsElement) -> float:
    return h.norm


def kernel_section(measure: SpectralMeasure, s) -> RkhsElement:
    """``psi(lam) = exp(-i <lam, s>)``, the element ``t -> exp(-a^2 |t - s|^2)``."""
    s = np.asarray(s, dtype=float).reshape(-1)
    return RkhsElement(measure, np.exp(-1j * (measure.nodes @ s)))


def random_unit_ball(measure: SpectralMeasure, seed, n: int = 1,
                     radius: str = "sphere") -> list:
    """Random elements of the unit ball.

    Mixes three families so the sample is not concentrated near one shape:
    sums of kernel sections at random centres, smooth random ``psi`` and
    ``psi`` concentrated on a random frequency shell.  With
    ``radius="sphere"`` every element has norm one; ``"ball"`` draws the
    norm uniformly from (0, 1].
    """
    rng = _rng(seed)
    lam = measure.nodes
    r = np.linalg.norm(lam, axis=1) / measure.scale
    out = []
    for i in range(n):
        kind = i % 3
        if kind == 0:
            m = rng.integers(1, 6)
            centres = rng.uniform(-0.5, 1.5, size=(m, measure.d))
            c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            psi = np.exp(-1j * (lam @ centres.T)) @ c
        elif kind == 1:
            m = rng.integers(1, 4)
            shift = rng.standard_normal((m, measure.d)) * measure.scale
            widths = rng.uniform(0.2, 2.0, size=m) * measure.scale
            c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            sq = np.sum((lam[:, None, :] - shift[None]) ** 2, axis=2)
            psi = np.exp(-sq / (2 * widths**2)) @ c
        else:
            lo = rng.uniform(0.0, 3.0)
            psi = np.where((r >= lo) & (r <= lo + 0.5), 1.0, 0.0).astype(complex)
            psi *= np.exp(1j * rng.uniform(0, 2 * np.pi, size=psi.shape))
            if not np.any(psi):
                psi = np.ones(lam.shape[0], dtype=complex)
        h = RkhsElement(measure, psi).normalized()
        if radius == "ball":
            h = h * rng.uniform(0.0, 1.0) ** (1.0 / max(measure.d, 1))
        out.append(h)
    return out


def sup_grid(d: int, k: Optional[int] = None) -> np.ndarray:
    """Dyadic evaluation grid on [0, 1]^d with ``2^k + 1`` nodes per axis
    (defaults: k = 9 for d = 1, k = 6 for d = 2, k = 4 otherwise)."""
    if k is None:
        k = {1: 9, 2: 6}.get(d, 4)
    return GridSpec.dyadic(k, d).points()


@dataclass(frozen=True)
class HigherOrderKernel:
    """Kernel ``phi`` with ``phi_hat = (2 pi)^-d prod_i b(lam_i)``.

    ``b`` equals 1 on [-1, 1], falls smoothly to 0 on 1 <= |x| <= 2 and
    vanishes beyond, so ``phi_hat`` is flat near zero: ``int phi = 1`` and
    every nonzero moment of ``phi`` vanishes.
    """

    d: int = 1
    n_gauss: int = 400

    @staticmethod
    def bump(x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        return 1.0 - smooth_step(x - 1.0)

    def hat(self, lam) -> np.ndarray:
        """``phi_hat(lam)`` for lam of shape (N, d)."""
        return self.multiplier(lam) / (2.0 * math.pi) ** self.d

    def multiplier(self, lam) -> np.ndarray:
        """``(2 pi)^d phi_hat(lam) = prod_i b(lam_i)``: the factor a convolution
        with ``a^d phi(a .)`` applies to frequency ``a lam``."""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        return np.prod(self.bump(lam), axis=1)

    def spatial_1d(self, u, n_gauss: Optional[int] = None) -> np.ndarray:
        """``(1/pi) int_0^2 b(x) cos(x u) dx``."""
        u = np.asarray(u, dtype=float)
        n = self.n_gauss if n_gauss is None else n_gauss
        n = max(n, int(np.max(np.abs(u), initial=0.0) / math.pi) + 64)
        x, wx = np.polynomial.legendre.leggauss(n)
        xs, ws = 1.0 + (x + 1) / 2, wx / 2
        with np.errstate(invalid="ignore", divide="ignore"):
            flat = np.where(u == 0, 1.0, np.sin(u) / np.where(u == 0, 1.0, u))
        taper = np.cos(np.multiply.outer(u, xs)) @ (self.bump(xs) * ws)
        return (flat + taper) / math.pi

    def moment(self, k: int, damping: float = 100.0, step: float = 0.02) -> float:
        """``int u^k phi_1(u) du`` for the one-dimensional factor.

        The integrand is damped by ``exp(-(u / damping)^2)``; the damping's
        transform is negligible beyond distance 1, so the flat top of
        ``phi_hat`` keeps every exact moment unchanged.
        """
        half = 8.0 * damping
        u = np.arange(-half, half + step / 2, step)
        vals = self.spatial_1d(u) * np.exp(-((u / damping) ** 2)) * u**k
        return float(np.sum(vals) * step)

    def spatial(self, t) -> np.ndarray:
        t = _as_points(t, self.d)
        out = np.ones(t.shape[0])
        for i in range(self.d):
            out *= self.spatial_1d(t[:, i])
        return out


# ---------------------------------------------------------------------------
# scaling, approximation


def scaling_isometry_check(psi: Callable[[np.ndarray], np.ndarray], a: float, d: int = 1,
                           quadrature: Optional[SpectralMeasure] = None,
                           quadrature_a: Optional[SpectralMeasure] = None,
                           t_check: Optional[np.ndarray] = None) -> dict:
    """Compare ``h`` at scale 1 with ``g(t) = h(a t)`` built at scale ``a``.

    ``g`` has coefficient ``psi(lam / a)`` on an independently built scale-``a``
    grid.  Returns the norm residual and the sup difference of ``g(t)`` and
    ``h(a t)`` over ``t_check`` (default: 65 points of [0, 1]^d).
    """
    q1 = SpectralMeasure.build(d, 1.0) if quadrature is None else quadrature
    if quadrature_a is None:
        if a == 1.0:
            qa = q1
        else:
            n = int(round(q1.nodes.shape[0] ** (1.0 / d)))
            qa = SpectralMeasure.build(d, a, n_per_axis=n + 1)
    else:
        qa = quadrature_a
    h = RkhsElement(q1, psi(q1.nodes))
    g = RkhsElement(qa, psi(qa.nodes / a))
    t = GridSpec.uniform(65 if d == 1 else 9, d).points() if t_check is None else t_check
    return {
        "residual": abs(h.norm - g.norm),
        "norm_scale_1": h.norm,
        "norm_scale_a": g.norm,
        "function_residual": float(np.max(np.abs(g(t) - h(a * t)))),
    }


def approximant_measure(d: int, a: float, period: float = 48.0,
                        max_nodes: int = 2_000_000) -> SpectralMeasure:
    """Grid for coefficients supported in ``[-2a, 2a]^d``.

    The node spacing ``2 pi / period`` keeps the periodic images of the
    approximant (which the trapezoid rule implicitly adds) at distance
    ``period`` from [0, 1]^d.
    """
    spacing = 2.0 * math.pi / period
    k = int(math.ceil(2.0 * a / spacing)) + 1
    if (2 * k + 1) ** d > max_nodes:
        spacing = 2.0 * a * 2.0 / (max_nodes ** (1.0 / d) - 1)
    return SpectralMeasure.build(d, a, half_width=2.0 * a + spacing, spacing=spacing)


class NoApproximantError(ValueError):
    """No decentering element within the requested sup-distance."""


def _convolution_element(w: TruthFunction, a: float, measure: Optional[SpectralMeasure],
                         kernel: Optional[HigherOrderKernel],
                         window: Optional[SmoothWindow]) -> RkhsElement:
    if not w.has_transform:
        raise ValueError(f"truth {w.name!r} has no Fourier transform")
    ker = HigherOrderKernel(w.d) if kernel is None else kernel
    q = approximant_measure(w.d, a) if measure is None else measure
    lam = q.nodes
    mult = ker.multiplier(lam / a)
    live = mult > 0
    psi = np.zeros(lam.shape[0], dtype=complex)
    # psi = w_hat(-lam) (2 pi)^d phi_hat(lam / a) / f_a(lam)
    psi[live] = w.transform(-lam[live], window) * mult[live] / q.density_values[live]
    return RkhsElement(q, psi)


def holder_approximant(w: TruthFunction, a: float, measure: Optional[SpectralMeasure] = None,
                       eval_points: Optional[np.ndarray] = None,
                       kernel: Optional[HigherOrderKernel] = None,
                       window: Optional[SmoothWindow] = None,
                       period: float = 48.0) -> tuple:
    """Convolution approximant ``a^d phi(a .) * w`` as an element of ``H^a``.

    Returns ``(h, sup_error)`` with the sup-norm error over ``eval_points``
    (default: the dyadic sup grid).  Trigonometric truths are windowed to a
    compactly supported extension first.  ``period`` sets the default grid
    spacing ``2 pi / period``; slowly decaying truths need a longer period.
    """
    if a < 1:
        raise ValueError("approximants are built for a >= 1")
    if measure is None:
        measure = approximant_measure(w.d, a, period)
    h = _convolution_element(w, a, measure, kernel, window)
    pts = sup_grid(w.d) if eval_points is None else eval_points
    err = float(np.max(np.abs(h(pts) - w(pts))))
    return h, err


def analytic_approximant(w: TruthFunction, a: float, measure: Optional[SpectralMeasure] = None,
                         eval_points: Optional[np.ndarray] = None,
                         kernel: Optional[HigherOrderKernel] = None) -> tuple:
    """Convolution approximant for analytic truths with ``r`` below the
    field's exponent 2.  Returns ``(h, sup_error, bound_shape)`` where
    ``bound_shape = exp(-gamma a^r) a^(r - 1)`` is the decay the error
    should follow up to a constant."""
    h, err = holder_approximant(w, a, measure, eval_points, kernel)
    s = w.smoothness
    shape = math.nan
    if isinstance(s, Analytic) and math.isfinite(s.gamma):
        shape = math.exp(-s.gamma * a**s.r) * a ** (s.r - 1)
    return h, err, shape


def analytic_membership(w: TruthFunction, a: float, measure: Optional[SpectralMeasure] = None,
                        rtol: float = 1e-6) -> float:
    """Squared ``H^a`` norm of ``w`` itself: ``int |w_hat|^2 / f_a dlam``.

    Requires a closed-form transform.  The integral is evaluated on two grids
    (default half-widths ``12 a`` and ``18 a``); if they disagree by more than
    ``rtol`` the integral is treated as divergent, which is what happens for
    ``r < 2`` or ``a`` below the threshold of the r = 2 class.
    """
    from .spectral import DivergentQuadratureError

    if w.fourier is None:
        raise ValueError(f"truth {w.name!r} has no closed-form transform")
    s = w.smoothness
    if isinstance(s, Analytic) and s.r < 2:
        raise DivergentQuadratureError(
            f"r = {s.r} < 2: w is not in H^a; use analytic_approximant")

    def sq(q):
        fw = w.fourier(q.nodes)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.abs(fw) ** 2 / q.density_values * q.cell
        return float(np.sum(vals))

    q1 = SpectralMeasure.build(w.d, a) if measure is None else measure
    n = int(round(q1.nodes.shape[0] ** (1.0 / w.d)))
    q2 = SpectralMeasure.build(w.d, a, n_per_axis=int(1.5 * n) + 1,
                               half_width=1.5 * q1.half_width)
    v1, v2 = sq(q1), sq(q2)
    if not (np.isfinite(v1) and np.isfinite(v2)) or abs(v1 - v2) > rtol * max(abs(v2), 1e-300):
        raise DivergentQuadratureError(
            f"int |w_hat|^2 / f_a not converged at a = {a:g}: {v1:.6g} vs {v2:.6g}")
    return v2


# ---------------------------------------------------------------------------
# entropy and small balls


def entropy_bound(a: float, eps: float, K: float = 1.0, d: int = 1) -> float:
    """``K a^d log(1/eps)^(1+d)``."""
    if not eps < 0.5:
        raise ValueError("entropy bound is stated for eps < 1/2")
    if eps <= 0 or a <= 0:
        raise ValueError("a and eps must be positive")
    return K * a**d * math.log(1.0 / eps) ** (1 + d)


def greedy_packing(values: np.ndarray, eps: float) -> int:
    """Size of a greedy eps-separated subset (sup distance) of the rows of ``values``."""
    kept = np.empty((0, values.shape[1]))
    for v in values:
        if kept.shape[0] == 0 or np.min(np.max(np.abs(kept - v), axis=1)) > eps:
            kept = np.vstack([kept, v])
    return kept.shape[0]


class SmallBallError(ArithmeticError):
    """No path fell in the ball; ``lower_bound`` is a 95% lower bound on the exponent."""

    def __init__(self, msg, lower_bound):
        super().__init__(msg)
        self.lower_bound = lower_bound


@dataclass(frozen=True)
class SmallBallEstimate:
    value: float
    successes: int
    n_paths: int
    nodes_per_axis: int
    converged: bool
    std_error: float
    by_level: dict = field(default_factory=dict)


def _path_factor(d: int, k: int, a: float) -> tuple:
    grid = GridSpec.dyadic(k, d)
    pts = grid.points()
    L, _ = jittered_cholesky(covariance_matrix(pts, scale=a))
    return grid, pts, L


def _level_masks(d: int, k_max: int, k_min: int) -> dict:
    n = 2**k_max + 1
    idx = np.arange(n)
    masks = {}
    for k in range(k_min, k_max + 1):
        on = idx % 2 ** (k_max - k) == 0
        m = on
        for _ in range(d - 1):
            m = np.multiply.outer(m, on)
        masks[k] = np.asarray(m).ravel()
    return masks


def small_ball_exponent(a: float, eps, n_paths: int = 100_000, seed=0, d: int = 1,
                        k_max: Optional[int] = None, k_min: int = 3,
                        rel_change: float = 0.05, chunk: int = 10_000,
                        center: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                        min_successes: int = 50, max_paths: Optional[int] = None):
    """Monte-Carlo estimate of ``-log P(sup_[0,1]^d |W^a - center| <= eps)``.

    Paths are exact multivariate normal draws on a dyadic grid with
    ``2^k_max + 1`` nodes per axis; coarser levels are nested sub-grids of the
    same paths.  The reported value is taken at the first level whose
    estimate changes by less than ``rel_change`` on refinement.  ``eps`` may
    be an array, in which case a list of estimates is returned.

    When fewer than ``min_successes`` paths land in the smallest ball, more
    paths are drawn (same stream) up to ``max_paths`` (default
    ``20 * n_paths``).
    """
    if k_max is None:
        k_max = {1: 8, 2: 5}.get(d, 3)
    k_min = min(k_min, k_max)
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    grid, pts, L = _path_factor(d, k_max, a)
    masks = _level_masks(d, k_max, k_min)
    shift = np.zeros(pts.shape[0]) if center is None else center(pts)
    counts = {k: np.zeros(eps_arr.size, dtype=np.int64) for k in masks}
    rng = _rng(seed)
    cap = 20 * n_paths if max_paths is None else max(max_paths, n_paths)
    done = 0
    while done < n_paths or (counts[k_max].min() < min_successes and done < cap):
        m = min(chunk, cap - done) if done >= n_paths else min(chunk, n_paths - done)
        paths = rng.standard_normal((m, pts.shape[0])) @ L.T - shift
        for k, mask in masks.items():
            sup = np.max(np.abs(paths[:, mask]), axis=1)
            counts[k] += np.sum(sup[:, None] <= eps_arr[None, :], axis=0)
        done += m
    n_paths = done
    results = []
    for j, e in enumerate(eps_arr):
        succ = {k: int(counts[k][j]) for k in masks}
        if succ[k_max] == 0:
            upper_p = 1.0 - 0.05 ** (1.0 / n_paths)
            raise SmallBallError(
                f"no paths within {e:g} of the centre at a = {a:g} ({n_paths} paths)",
                -math.log(upper_p))
        by_level = {k: (-math.log(c / n_paths) if c > 0 else math.inf) for k, c in succ.items()}
        chosen, converged = k_max, False
        for k in range(k_min, k_max):
            v, v_next = by_level[k], by_level[k + 1]
            if math.isfinite(v_next) and v_next > 0 and abs(v_next - v) < rel_change * v_next:
                chosen, converged = k + 1, True
                break
            if math.isfinite(v_next) and v_next == 0 and v == 0:
                chosen, converged = k + 1, True
                break
        c = succ[chosen]
        p = c / n_paths
        se = math.sqrt((1 - p) / (n_paths * p)) if p > 0 else math.inf
        results.append(SmallBallEstimate(by_level[chosen], c, n_paths, 2**chosen + 1,
                                         converged, se, by_level))
    return results if np.ndim(eps) else results[0]


# ---------------------------------------------------------------------------
# nesting, pointwise bounds


@dataclass(frozen=True)
class NestingReport:
    sq_norm_a: float
    sq_norm_b: float
    bound: float           # (b / a)^d |h|^2_{H^a}
    slack: float           # bound - |h|^2_{H^b}
    function_residual: float
    holds: bool


def nesting_check(h: RkhsElement, b: float, t=None, tol: float = 1e-10) -> NestingReport:
    """Re-express ``h`` at scale ``b >= a`` with ``psi_b = psi f_a / f_b``.

    Checks ``|h|^2_{H^b} <= (b/a)^d |h|^2_{H^a}`` and that both coefficient
    functions give the same function.  (In one dimension the factor is b/a.)
    """
    a = h.scale
    if b < a:
        raise ValueError("nesting needs b >= a")
    q = h.measure
    fb = q.base_density(q.nodes / b) / b**q.d
    qb = SpectralMeasure(q.d, float(b), q.nodes, q.cell, fb, q.spacing, q.half_width,
                         q.base_density)
    hb = RkhsElement(qb, h.psi * q.density_values / fb)
    bound = (b / a) ** q.d * h.sq_norm
    pts = sup_grid(q.d, 6) if t is None else _as_points(t, q.d)
    fr = float(np.max(np.abs(hb(pts) - h(pts))))
    slack = bound - hb.sq_norm
    return NestingReport(h.sq_norm, hb.sq_norm, bound, slack, fr, slack >= -tol * max(bound, 1.0))


@dataclass(frozen=True)
class PointwiseReport:
    value_at_zero: float
    bound_at_zero: float
    increment: np.ndarray
    increment_bound: np.ndarray
    holds: bool


def unit_ball_pointwise_check(h: RkhsElement, t, tau: Optional[float] = None,
                              tol: float = 1e-10) -> PointwiseReport:
    """Check ``|h(0)| <= sqrt(mu(R^d))`` and ``|h(t) - h(0)| <= a |t| tau``.

    ``tau^2 = int |lam|^2 dmu`` (scale 1); it is computed on the element's
    grid when not given.  ``h`` must lie in the unit ball.
    """
    if h.norm > 1 + 1e-9:
        raise ValueError(f"element has norm {h.norm:.6g} > 1")
    q = h.measure
    mass = q.total_mass
    if tau is None:
        tau = math.sqrt(q.moment(2)) / q.scale
    pts = _as_points(t, q.d)
    h0 = float(h(np.zeros((1, q.d)))[0])
    inc = np.abs(h(pts) - h0)
    bound = q.scale * np.linalg.norm(pts, axis=1) * tau
    ok = abs(h0) <= math.sqrt(mass) + tol and bool(np.all(inc <= bound + tol))
    return PointwiseReport(h0, math.sqrt(mass), inc, bound, ok)


# ---------------------------------------------------------------------------
# concentration function


@dataclass(frozen=True)
class ConcentrationReport:
    value: float
    decentering: float       # squared norm of the approximant
    small_ball: float        # -log P(|W^a| <= eps)
    approximation_error: float
    method: str


def _decentering(w0: TruthFunction, a: float, eps: float, eval_points=None) -> tuple:
    pts = sup_grid(w0.d) if eval_points is None else eval_points
    if w0.name == "zero":
        return 0.0, 0.0, "zero"
    s = w0.smoothness
    if isinstance(s, Analytic) and s.r >= 2 and w0.fourier is not None:
        try:
            return analytic_membership(w0, a), 0.0, "membership"
        except ArithmeticError:
            pass
    if isinstance(s, Analytic) and s.r < 2:
        h, err, _ = analytic_approximant(w0, a, eval_points=pts)
        return h.sq_norm, err, "analytic-approximant"
    h, err = holder_approximant(w0, max(a, 1.0), eval_points=pts)
    return h.sq_norm, err, "convolution-approximant"


def concentration_function(w0: TruthFunction, a: float, eps: float, n_paths: int = 100_000,
                           seed=0, **small_ball_kw) -> ConcentrationReport:
    """Upper surrogate for the concentration function at ``w0``:
    squared norm of a constructive approximant within ``eps`` plus the
    centred small-ball exponent."""
    dec, err, method = _decentering(w0, a, eps)
    if err > eps:
        raise NoApproximantError(
            f"approximant error {err:.3g} exceeds eps = {eps:g} at a = {a:g}")
    sb = small_ball_exponent(a, eps, n_paths=n_paths, seed=seed, d=w0.d, **small_ball_kw)
    return ConcentrationReport(dec + sb.value, dec, sb.value, err, method)


def shifted_ball_check(w0: TruthFunction, a: float, eps: float, n_paths: int = 100_000,
                       seed=0, confidence: float = 0.999) -> dict:
    """Monte-Carlo check of ``P(|W^a - w0|_inf <= 2 eps) >= exp(-phi_w0(eps))``.

    The inequality counts as violated only if the one-sided upper confidence
    bound (Clopper-Pearson, level ``confidence``) on the probability falls
    below ``exp(-phi)``.
    """
    dec, err, _ = _decentering(w0, a, eps)
    if err > eps:
        raise NoApproximantError(
            f"approximant error {err:.3g} exceeds eps = {eps:g} at a = {a:g}")
    try:
        sb = small_ball_exponent(a, eps, n_paths=n_paths, seed=seed, d=w0.d).value
        sb_is_bound = False
    except SmallBallError as exc:
        # a lower bound on the exponent makes exp(-phi) larger: a stricter check
        sb, sb_is_bound = exc.lower_bound, True
    phi = dec + sb
    d = w0.d
    k_max = {1: 8, 2: 5}.get(d, 3)
    grid, pts, L = _path_factor(d, k_max, a)
    shift = w0(pts)
    rng = _rng(np.random.SeedSequence([int(seed) if not isinstance(seed, np.random.Generator) else 0, 51]))
    hits = 0
    done = 0
    while done < n_paths:
        m = min(10_000, n_paths - done)
        paths = rng.standard_normal((m, pts.shape[0])) @ L.T
        hits += int(np.sum(np.max(np.abs(paths - shift), axis=1) <= 2 * eps))
        done += m
    p_hat = hits / n_paths
    upper = 1.0 if hits == n_paths else float(stats.beta.ppf(confidence, hits + 1, n_paths - hits))
    bound = math.exp(-phi)
    return {
        "probability": p_hat,
        "upper_confidence": upper,
        "bound": bound,
        "phi": phi,
        "decentering": dec,
        "small_ball": sb,
        "small_ball_is_lower_bound": sb_is_bound,
        "approximation_error": err,
        "holds": upper >= bound,
    }


# ---------------------------------------------------------------------------
# normal quantile bounds


def normal_quantile_checks(x=None, u=None) -> dict:
    """Pointwise checks of four standard-normal inequalities.

    * ``Phi(x) <= exp(-x^2/2)`` for x < 0
    * ``-sqrt(2 log(1/u)) <= Phi^-1(u)`` for u in (0, 1)
    * ``Phi^-1(u) <= -sqrt(log(1/u)) / 2`` for u in (0, 1/4)
    * ``Phi(sqrt(2 x) + Phi^-1(exp(-x))) >= 1/2`` for x > 0

    Comparisons are done on the log scale where the tails underflow.  Returns
    boolean arrays keyed by check name (an entry is omitted when its domain
    is empty).
    """
    out = {}
    if x is not None:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        neg = x[x < 0]
        if neg.size:
            out["cdf_tail"] = special.log_ndtr(neg) <= -neg**2 / 2 + 1e-12
        pos = x[x > 0]
        if pos.size:
            q = special.ndtri(np.exp(-pos))
            out["shifted_quantile"] = special.ndtr(np.sqrt(2 * pos) + q) >= 0.5 - 1e-12
    if u is not None:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        inside = u[(u > 0) & (u < 1)]
        if inside.size:
            out["quantile_lower"] = -np.sqrt(2 * np.log(1 / inside)) <= special.ndtri(inside) + 1e-12
        small = u[(u > 0) & (u < 0.25)]
        if small.size:
            out["quantile_upper"] = special.ndtri(small) <= -0.5 * np.sqrt(np.log(1 / small)) + 1e-12
    return out
