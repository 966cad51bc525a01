"""Special functions, adaptive quadrature and one-dimensional sup search.

The quadrature is a globally adaptive Gauss-Kronrod (7/15) bisection scheme
that evaluates every active subinterval in one vectorised call.  Two
substitutions make the radial integrals of this package tractable:

* near the origin, ``r = r1 * v**k`` with an integer ``k`` that absorbs the
  algebraic factor ``r**s`` (``s > -1``);
* beyond the last kink, ``z = r**2 / scale`` followed by
  ``z = z0 + v / (1 - v)`` turns the Gaussian tail into a finite interval
  with an integrand that vanishes smoothly at ``v = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, QuadratureError

# ---------------------------------------------------------------------------
# log-Gamma
# ---------------------------------------------------------------------------

EULER_GAMMA = 0.57721566490153286061

# B_2k / (2k (2k-1)) for the Stirling series
_BERNOULLI = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30),
              Fraction(5, 66), Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510)]
_STIRLING = [float(b / ((2 * k + 2) * (2 * k + 1))) for k, b in enumerate(_BERNOULLI)]
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_MIN = 10.0


def _zeta(k: int, n: int = 12) -> float:
    """Riemann zeta at integer ``k >= 2`` by Euler-Maclaurin summation."""
    head = math.fsum(j ** -float(k) for j in range(1, n))
    tail = n ** (1.0 - k) / (k - 1) + 0.5 * n ** -float(k)
    rising = float(k)  # k (k+1) ... (k+2j-2)
    fact = 2.0  # (2j)!
    for j, b in enumerate(_BERNOULLI[:6], start=1):
        tail += float(b) / fact * rising * n ** (-k - 2.0 * j + 1.0)
        rising *= (k + 2 * j - 1) * (k + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


# lgamma(1 + e) = -EULER_GAMMA e + sum_k zeta(k) (-e)^k / k, used for |e| <= 1/2
_TAYLOR = [(-1) ** k * _zeta(k) / k for k in range(2, 60)]


def _lgamma1p(eps: float) -> float:
    acc = 0.0
    for coef in reversed(_TAYLOR):
        acc = (acc + coef) * eps
    return (acc - EULER_GAMMA) * eps


def _stirling(x: float) -> float:
    inv = 1.0 / x
    inv2 = inv * inv
    corr = 0.0
    for coef in reversed(_STIRLING):
        corr = corr * inv2 + coef
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + corr * inv


def log_gamma(x: float) -> float:
    """Natural logarithm of ``Gamma(x)`` for ``x > 0``.

    Taylor expansion around 1 and 2 keeps relative accuracy near the zeros
    of ``log Gamma``; elsewhere the Stirling series, after upward recurrence
    for ``x < 10``.
    """
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma needs a finite x > 0, got {x}")
    if x < 0.5:
        return _lgamma1p(x) - math.log(x)
    if x <= 1.5:
        return _lgamma1p(x - 1.0)
    if x <= 2.5:
        return math.log1p(x - 2.0) + _lgamma1p(x - 2.0)
    if x >= _STIRLING_MIN:
        return _stirling(x)
    n = math.ceil(_STIRLING_MIN - x)
    prod = 1.0
    for j in range(n):
        prod *= x + j
    return _stirling(x + n) - math.log(prod)


def gamma_ratio(a: float, b: float) -> float:
    """``Gamma(a) / Gamma(b)`` evaluated through log-Gamma."""
    return math.exp(log_gamma(a) - log_gamma(b))


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
_WK15 = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 9, 11, 13]] = np.concatenate([_WG[:3], _WG[2::-1]])
_WG15[7] = _WG[3]
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_refinements: int = 30
    max_intervals: int = 200_000

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_refinements < 1:
            raise DomainError("max_refinements must be >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()

Integrand = Callable[[np.ndarray], np.ndarray]


def _gk15(func: Integrand, a: np.ndarray, b: np.ndarray):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
    kron = half * (fx @ _WK15)
    gauss = half * (fx @ _WG15)
    mean = kron / np.where(half != 0, 2.0 * half, 1.0)
    resasc = np.abs(half) * (np.abs(fx - mean[:, None]) @ _WK15)
    resabs = np.abs(half) * (np.abs(fx) @ _WK15)
    err = np.abs(kron - gauss)
    scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), err)
    floor = 50.0 * _EPS * resabs
    return kron, np.maximum(scaled, floor), np.isfinite(fx).all(axis=1)


def _adaptive(segments: Sequence[tuple[Integrand, np.ndarray, np.ndarray]],
              cfg: QuadratureConfig) -> tuple[float, float]:
    """Integrate a union of panels, each group sharing one integrand."""
    groups = []
    for func, a, b in segments:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.size == 0:
            continue
        val, err, ok = _gk15(func, a, b)
        if not ok.all():
            raise QuadratureError("integrand is not finite", float(np.nansum(val)), math.inf)
        groups.append([func, a, b, np.zeros(a.size, dtype=int), val, err])
    if not groups:
        return 0.0, 0.0
    while True:
        total = float(sum(g[4].sum() for g in groups))
        total_err = float(sum(g[5].sum() for g in groups))
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if total_err <= tol:
            return total, total_err
        n_int = sum(g[1].size for g in groups)
        if n_int > cfg.max_intervals:
            raise QuadratureError("too many subintervals", total, total_err)
        share = tol / n_int
        for g in groups:
            func, a, b, depth, val, err = g
            split = err > share
            if not split.any():
                continue
            if np.any(depth[split] >= cfg.max_refinements):
                raise QuadratureError(f"no convergence after {cfg.max_refinements} refinements",
                                      total, total_err)
            mid = 0.5 * (a[split] + b[split])
            na = np.concatenate([a[split], mid])
            nb = np.concatenate([mid, b[split]])
            nval, nerr, ok = _gk15(func, na, nb)
            if not ok.all():
                raise QuadratureError("integrand is not finite", total, math.inf)
            keep = ~split
            nd = np.concatenate([depth[split], depth[split]]) + 1
            g[1] = np.concatenate([a[keep], na])
            g[2] = np.concatenate([b[keep], nb])
            g[3] = np.concatenate([depth[keep], nd])
            g[4] = np.concatenate([val[keep], nval])
            g[5] = np.concatenate([err[keep], nerr])


def integrate(func: Integrand, a: float, b: float,
              cfg: QuadratureConfig = DEFAULT_QUADRATURE,
              breakpoints: Sequence[float] = ()) -> float:
    """Adaptive integral of a vectorised ``func`` over the finite ``[a, b]``."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate() needs finite limits")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    nodes = np.unique(np.concatenate([[a, b], [x for x in breakpoints if a < x < b]]))
    val, _ = _adaptive([(func, nodes[:-1], nodes[1:])], cfg)
    return sign * val


def _power_substitution(s: float) -> int:
    """Integer ``k`` for ``r = v**k`` so that ``r**s dr`` becomes smooth in ``v``."""
    frac = Fraction(s).limit_denominator(16)
    if abs(float(frac) - s) < 1e-12:
        return frac.denominator
    return max(1, math.ceil(2.0 / (s + 1.0)))


def _origin_panel(func: Integrand, s: float, r1: float) -> tuple[Integrand, float]:
    """Integrand on ``v in [0, 1]`` equal to ``int_0^r1 func(r) r**s dr`` and its prefactor."""
    k = _power_substitution(s)
    power = k * (s + 1.0) - 1.0

    def g(v):
        return v**power * func(r1 * v**k)

    return g, k * r1 ** (s + 1.0)


def power_integral(func: Integrand, singular_exponent: float, upper: float,
                   cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                   breakpoints: Sequence[float] = ()) -> float:
    """``int_0^upper func(r) r**singular_exponent dr`` for ``singular_exponent > -1``."""
    s = float(singular_exponent)
    if not s > -1.0:
        raise DomainError("singular exponent must exceed -1 for integrability")
    if not upper > 0:
        return 0.0
    nodes = sorted({float(x) for x in breakpoints if 0 < x < upper} | {float(upper)})
    r1 = nodes[0]
    g0, pref = _origin_panel(func, s, r1)
    segments = [(lambda v: pref * g0(v), np.array([0.0]), np.array([1.0]))]
    if len(nodes) > 1:
        edges = np.array(nodes)
        segments.append((lambda r: func(r) * r**s, edges[:-1], edges[1:]))
    val, _ = _adaptive(segments, cfg)
    return val


_TAIL_CUTOFF = 38.0  # exp(-38**2) underflows


def radial_integral(func: Integrand, singular_exponent: float, gaussian_scale: float,
                    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                    breakpoints: Sequence[float] = ()) -> float:
    """``int_0^inf func(r) r**s exp(-r**2 / gaussian_scale) dr`` with ``s > -1``.

    ``func`` must be vectorised, bounded on compacts and at most polynomially
    growing.  ``breakpoints`` lists radii where ``func`` has kinks or jumps.
    """
    s = float(singular_exponent)
    if not s > -1.0:
        raise DomainError("singular exponent must exceed -1 for integrability")
    if not gaussian_scale > 0:
        raise DomainError("gaussian_scale must be positive")
    root = math.sqrt(gaussian_scale)

    def body(w):
        return func(root * w) * np.exp(-w * w)

    cuts = sorted({float(x) / root for x in breakpoints if x > 0} | {1.0})
    cuts = [w for w in cuts if w < _TAIL_CUTOFF] or [_TAIL_CUTOFF]
    w1 = cuts[0]
    g0, pref = _origin_panel(body, s, w1)
    segments = [(lambda v: pref * g0(v), np.array([0.0]), np.array([1.0]))]
    if len(cuts) > 1:
        edges = np.array(cuts)
        segments.append((lambda w: body(w) * w**s, edges[:-1], edges[1:]))
    w_last = cuts[-1]
    if w_last < _TAIL_CUTOFF:
        z0 = w_last * w_last
        tail_pref = 0.5 * math.exp(-z0)

        def tail(v):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                x = v / (1.0 - v)
                z = z0 + x
                out = tail_pref * func(root * np.sqrt(z)) * z ** (0.5 * (s - 1.0)) \
                    * np.exp(-x) * (1.0 + x) ** 2
            return np.where(np.isfinite(x), out, 0.0)

        segments.append((tail, np.array([0.0]), np.array([1.0])))
    val, _ = _adaptive(segments, cfg)
    return gaussian_scale ** (0.5 * (s + 1.0)) * val


# ---------------------------------------------------------------------------
# sup search
# ---------------------------------------------------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
FLAT_RTOL = 1e-9
DEFAULT_LOG_WINDOW = (math.log(1e-6), math.log(1e6))
DEFAULT_GRID_POINTS = 241


@dataclass(frozen=True, eq=False)
class SupSearchResult:
    """Outcome of :func:`sup_search`.

    ``edge`` is ``"lower"``/``"upper"`` when the best scanned value sits at
    that end of the window; ``edge_slope`` is then ``d log g / d log x``
    estimated from the two outermost scan points (positive means the
    objective still grows outward).
    """

    argmax: float
    value: float
    converged: bool
    edge: str | None = None
    edge_slope: float = 0.0
    log_grid: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    scan: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def diverges(self, slope_tol: float = 1e-3) -> bool:
        """True when the objective keeps growing past an edge of the window."""
        return self.edge is not None and self.edge_slope > slope_tol


def _log_slope(g_in: float, g_out: float, step: float) -> float:
    if g_in > 0 and g_out > 0:
        return math.log(g_out / g_in) / step
    return math.inf if g_out > g_in else 0.0


def sup_search(g: Callable[[float], float], log_lo: float = DEFAULT_LOG_WINDOW[0],
               log_hi: float = DEFAULT_LOG_WINDOW[1], grid_points: int = DEFAULT_GRID_POINTS,
               xtol: float = 1e-10) -> SupSearchResult:
    """Maximise ``g(log x)`` over ``log x in [log_lo, log_hi]``.

    A log-spaced scan locates the best bracket, then golden-section search
    refines it.  Maxima at either end of the window are reported with
    ``converged=False`` instead of being extrapolated.
    """
    if not log_lo < log_hi:
        raise DomainError("sup_search needs log_lo < log_hi")
    if grid_points < 16:
        raise DomainError("sup_search needs at least 16 grid points")
    grid = np.linspace(log_lo, log_hi, grid_points)
    scan = np.array([float(g(x)) for x in grid])
    if np.any(np.isnan(scan)):
        raise ArithmeticError("objective returned NaN during scan")
    i = int(np.argmax(scan))
    top, bottom = float(scan[i]), float(scan.min())
    if top - bottom <= FLAT_RTOL * abs(top) or top == bottom:
        mid = grid_points // 2
        return SupSearchResult(math.exp(grid[mid]), float(scan[mid]), True, None, 0.0, grid, scan)
    step = grid[1] - grid[0]
    if i == 0:
        slope = _log_slope(scan[1], scan[0], step)
        return SupSearchResult(math.exp(grid[0]), top, False, "lower", slope, grid, scan)
    if i == grid_points - 1:
        slope = _log_slope(scan[-2], scan[-1], step)
        return SupSearchResult(math.exp(grid[-1]), top, False, "upper", slope, grid, scan)

    a, b = float(grid[i - 1]), float(grid[i + 1])
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = float(g(x1)), float(g(x2))
    for _ in range(200):
        if b - a <= xtol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = float(g(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = float(g(x2))
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    if top > best_f:
        best_x, best_f = float(grid[i]), top
    return SupSearchResult(math.exp(best_x), best_f, (b - a) < 1e-6, None, 0.0, grid, scan)
