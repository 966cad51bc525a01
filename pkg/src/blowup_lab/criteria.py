"""Blowup criteria, thresholds and critical Morrey norms for radial data.

The central quantity is ``sup_T T^(1/(p-1)) (e^{T Delta} u0)(0)``: if it
exceeds ``(1/(p-1))^(1/(p-1))`` no nonnegative solution survives past the
least such ``T``.  For radially nonincreasing data the origin carries the
sup norm of the heat flow, so the radial evaluation is the full criterion.

All Gamma-laden constants are assembled in log space.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

import numpy as np

from .errors import DomainError
from .model import ModelParams, RadialProfile, gamma_exponent, singular_constant
from .numerics import (
    DEFAULT_GRID_POINTS,
    DEFAULT_LOG_WINDOW,
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    log_gamma,
    power_integral,
    radial_integral,
    sup_search,
)

BLOWUP = "blowup_predicted"
INCONCLUSIVE = "inconclusive"
DIVERGENT = "divergent"


def log_surface_area(d: int) -> float:
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d)


def encode_number(x: float | None) -> Any:
    """JSON-safe number: non-finite values become ``"nan"``/``"infinite"``."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "infinite" if x > 0 else "-infinite"
    return x


def decode_number(x: Any) -> float:
    if isinstance(x, str):
        return {"nan": math.nan, "infinite": math.inf, "-infinite": -math.inf}[x]
    return float(x)


# ---------------------------------------------------------------------------
# heat semigroup at the origin
# ---------------------------------------------------------------------------


def heat_at_origin(profile: RadialProfile, d: int, T: float,
                   cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``(e^{T Delta} u0)(0)`` for a radial datum in dimension ``d``."""
    if not T > 0:
        raise DomainError("heat_at_origin needs T > 0")
    e = profile.singular_power
    if not e < d:
        raise DomainError("profile is not locally integrable in this dimension")
    integral = radial_integral(profile.regular_part, d - 1.0 - e, 4.0 * T, cfg,
                               profile.breakpoints)
    if integral == 0.0:
        return 0.0
    return math.exp(log_surface_area(d) - 0.5 * d * math.log(4.0 * math.pi * T)) * integral


def blowup_threshold(p: float) -> float:
    """``(1/(p-1))^(1/(p-1))``."""
    q = 1.0 / (float(p) - 1.0) if float(p) > 1.0 else None
    if q is None:
        raise DomainError(f"exponent must satisfy p > 1, got p={p}")
    return q**q


def scaled_semigroup_constant(d: int, p: float) -> float:
    """``T^(1/(p-1)) (e^{T Delta} u_C)(0)``, independent of ``T``:
    ``c 2^(-gamma) Gamma((d-gamma)/2) / Gamma(d/2)``."""
    c = singular_constant(d, p)
    g = gamma_exponent(p)
    return math.exp(math.log(c) - g * math.log(2.0)
                    + log_gamma(0.5 * (d - g)) - log_gamma(0.5 * d))


def blowup_time_bound_from_W0(W0: float, p: float) -> float:
    """Largest ``T`` with ``W0 > ((p-1) T)^(-1/(p-1))`` at equality: ``W0^(1-p)/(p-1)``."""
    if not W0 > 0:
        raise DomainError("W0 must be positive")
    p = float(p)
    if math.isinf(W0):
        return 0.0
    return math.exp((1.0 - p) * math.log(W0)) / (p - 1.0)


@dataclass(frozen=True)
class CriterionReport:
    quantity: float
    argmax_T: float | str
    threshold: float
    verdict: str
    margin: float
    blowup_time_bound: float | str

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        for key in ("quantity", "threshold", "margin"):
            out[key] = encode_number(out[key])
        for key in ("argmax_T", "blowup_time_bound"):
            if not isinstance(out[key], str):
                out[key] = encode_number(out[key])
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CriterionReport":
        def opt(x, tag):
            return x if x == tag else decode_number(x)

        return cls(decode_number(data["quantity"]), opt(data["argmax_T"], DIVERGENT),
                   decode_number(data["threshold"]), str(data["verdict"]),
                   decode_number(data["margin"]), opt(data["blowup_time_bound"], "none"))


def _bisect_crossing(g, lo: float, hi: float, level: float, tol: float = 1e-12) -> float:
    """Smallest-side crossing of ``g = level`` in ``[lo, hi]`` with ``g(lo) <= level < g(hi)``."""
    for _ in range(200):
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > level:
            hi = mid
        else:
            lo = mid
    return hi


def check_blowup_criterion(profile: RadialProfile, params: ModelParams,
                           cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                           log_window: tuple[float, float] = DEFAULT_LOG_WINDOW,
                           grid_points: int = DEFAULT_GRID_POINTS) -> CriterionReport:
    """Evaluate the Gaussian-moment blowup criterion for ``profile``.

    The sup over ``T`` is taken on ``log_window``; when the objective is
    still growing at an edge of the window ``argmax_T`` is ``"divergent"``
    and ``quantity`` is the largest scanned value.
    """
    d, p = params.d, params.p
    inv = 1.0 / (p - 1.0)
    threshold = blowup_threshold(p)

    def objective(log_t: float) -> float:
        h = heat_at_origin(profile, d, math.exp(log_t), cfg)
        return math.exp(inv * log_t) * h if h > 0 else 0.0

    res = sup_search(objective, *log_window, grid_points=grid_points)
    quantity = res.value
    argmax: float | str = DIVERGENT if res.diverges() else res.argmax
    margin = quantity - threshold
    if not quantity > threshold:
        return CriterionReport(quantity, argmax, threshold, INCONCLUSIVE, margin, "none")

    grid, scan = res.log_grid, res.scan
    above = np.nonzero(scan > threshold)[0]
    if above.size:
        i = int(above[0])
        lo, hi = (grid[i - 1], grid[i]) if i > 0 else (None, grid[0])
    else:
        hi = math.log(res.argmax)
        lo = float(grid[grid < hi][-1])
    bound = math.exp(hi if lo is None else _bisect_crossing(objective, float(lo), float(hi), threshold))
    return CriterionReport(quantity, argmax, threshold, BLOWUP, margin, bound)


# ---------------------------------------------------------------------------
# thresholds N and M
# ---------------------------------------------------------------------------


def threshold_N(d: int, p: float) -> tuple[float, float]:
    """Upper bound for the blowup multiple of ``u_C`` and its large-``d`` form.

    exact = 2^(1/(p-1)) (d - 2p/(p-1))^(-1/(p-1)) Gamma(d/2) / Gamma(d/2 - 1/(p-1))
    asymptotic = (1 - 2p/(d(p-1)))^(-1/(p-1))
    """
    singular_constant(d, p)  # domain check
    p = float(p)
    inv = 1.0 / (p - 1.0)
    gap = d - 2.0 * p / (p - 1.0)
    exact = math.exp(inv * math.log(2.0) - inv * math.log(gap)
                     + log_gamma(0.5 * d) - log_gamma(0.5 * d - inv))
    asymptotic = math.exp(-inv * math.log1p(-2.0 * p / (d * (p - 1.0))))
    return exact, asymptotic


def threshold_M(d: int, p: float) -> tuple[float, float]:
    """Bound on the critical Morrey norm forcing blowup of radial data.

    bound = (1/(p-1))^(1/(p-1)) (4 pi)^(d/2) e^((d-gamma)/2) (2(d-gamma))^((gamma-d)/2)

    The asymptotic companion is the Stirling form
    ``2^gamma (1/(p-1))^(1/(p-1)) sigma_d ((d-gamma)/2)^((gamma-1)/2) sqrt(pi/2)``.
    """
    g = gamma_exponent(p)
    p = float(p)
    if not d - g > 0:
        raise DomainError("Morrey threshold requires p > (d+2)/d")
    inv = 1.0 / (p - 1.0)
    log_thr = inv * math.log(inv)
    half_gap = 0.5 * (d - g)
    log_bound = (log_thr + 0.5 * d * math.log(4.0 * math.pi) + half_gap
                 - half_gap * math.log(2.0 * (d - g)))
    log_asym = (g * math.log(2.0) + log_thr + log_surface_area(d)
                + 0.5 * (g - 1.0) * math.log(half_gap) + 0.5 * math.log(0.5 * math.pi))
    return math.exp(log_bound), math.exp(log_asym)


def morrey_norm_singular(d: int, p: float) -> float:
    """``c sigma_d / (d - gamma)``, the critical Morrey norm of ``u_C``."""
    c = singular_constant(d, p)
    g = gamma_exponent(p)
    return math.exp(math.log(c) + log_surface_area(d) - math.log(d - g))


@dataclass(frozen=True)
class ThresholdReport:
    N_exact: float
    N_asymptotic: float
    M_bound: float
    M_asymptotic: float
    morrey_norm_uC: float

    def to_dict(self) -> dict[str, Any]:
        return {k: encode_number(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ThresholdReport":
        return cls(**{k: decode_number(data[k]) for k in
                      ("N_exact", "N_asymptotic", "M_bound", "M_asymptotic", "morrey_norm_uC")})


def thresholds(d: int, p: float) -> ThresholdReport:
    n_exact, n_asym = threshold_N(d, p)
    m_bound, m_asym = threshold_M(d, p)
    return ThresholdReport(n_exact, n_asym, m_bound, m_asym, morrey_norm_singular(d, p))


# ---------------------------------------------------------------------------
# radial mass and Morrey norm
# ---------------------------------------------------------------------------


def radial_mass(profile: RadialProfile, d: int, R: float,
                cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``M(R) = sigma_d int_0^R u0(rho) rho^(d-1) d rho``."""
    if not R > 0:
        return 0.0
    e = profile.singular_power
    if not e < d:
        raise DomainError("profile is not locally integrable in this dimension")
    val = power_integral(profile.regular_part, d - 1.0 - e, R, cfg, profile.breakpoints)
    return math.exp(log_surface_area(d)) * val


def morrey_norm(profile: RadialProfile, params: ModelParams,
                cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                log_window: tuple[float, float] = DEFAULT_LOG_WINDOW,
                grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Critical Morrey norm (``q = 1``) ``sup_R R^(gamma-d) M(R)`` of radial data.

    Returns ``math.inf`` when the ratio keeps growing past the window edge.
    """
    d, g = params.d, params.gamma

    def objective(log_r: float) -> float:
        m = radial_mass(profile, d, math.exp(log_r), cfg)
        return math.exp((g - d) * log_r) * m if m > 0 else 0.0

    res = sup_search(objective, *log_window, grid_points=grid_points)
    return math.inf if res.diverges() else res.value


# ---------------------------------------------------------------------------
# weighted nonlinearity Q(x) = |x|^beta
# ---------------------------------------------------------------------------


def weighted_criterion_bound(d: int, p: float, beta: float, T: float,
                             cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Moment level forcing blowup by time ``T`` for ``u_t = Delta u + |x|^beta u^p``.

    Returns ``(4 pi)^(-d/2) (int_0^T (p-1) s^(d(p-1)/2) I(s)^(1-p) ds)^(-1/(p-1))``
    with ``I(s) = int |x|^(-beta/(p-1)) exp(-|x|^2 / 4s) dx`` in closed Gamma
    form and the ``s`` integral done by adaptive quadrature.
    """
    p = float(p)
    if not p > 1:
        raise DomainError("exponent must satisfy p > 1")
    if not T > 0:
        raise DomainError("T must be positive")
    b = beta / (p - 1.0)
    if not beta < d * (p - 1.0):
        raise DomainError("inner integral diverges: need beta < d(p-1)")
    if not beta > -2.0:
        raise DomainError("time integral diverges: need beta > -2")
    half = 0.5 * (d - b)
    log_inner_coef = log_surface_area(d) + log_gamma(half) - math.log(2.0)

    def outer(s):
        log_inner = log_inner_coef + half * np.log(4.0 * s)
        return (p - 1.0) * np.exp(0.5 * d * (p - 1.0) * np.log(s) + (1.0 - p) * log_inner)

    s_exp = 0.5 * beta
    total = power_integral(lambda s: outer(s) * s ** (-s_exp), s_exp, T, cfg)
    return math.exp(-0.5 * d * math.log(4.0 * math.pi) - math.log(total) / (p - 1.0))
