"""Gaussian-moment tracking and the moment inequalities along simulations.

For a horizon ``T_ref`` the moment ``W(t) = int G(x, t) u(x, t) dx`` pairs the
solution with the backward heat kernel that concentrates at the origin at
``t = T_ref``.  Along any nonnegative solution ``dW/dt >= W**p``, hence
``W(t) >= (W(0)**(1-p) - (p-1) t)**(-1/(p-1))``; the checks below measure
how well a discrete run honours both.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .errors import DomainError
from .model import surface_area
from .numerics import radial_integral

if TYPE_CHECKING:
    from .solver import SimState


def backward_kernel(x_radius, t: float, T_ref: float, d: int):
    """``(4 pi (T_ref - t))^(-d/2) exp(-|x|^2 / (4 (T_ref - t)))``."""
    tau = T_ref - t
    if not tau > 0:
        raise DomainError("backward kernel is only defined for t < T_ref")
    x = np.asarray(x_radius, dtype=float)
    out = np.exp(-x * x / (4.0 * tau) - 0.5 * d * math.log(4.0 * math.pi * tau))
    return out if out.ndim else float(out)


def _far_field(state: "SimState"):
    """``(r_last, u_last, a)`` describing ``u ~ u_last (r/r_last)^-a`` past the grid."""
    return float(state.r[-1]), float(state.values[-1]), float(state.tail_exponent)


def moment_W(state: "SimState", T_ref: float, d: int) -> float:
    """Gaussian moment ``W(t)`` of a grid state.

    Trapezoidal rule on the grid, plus the ball inside the first node (value
    frozen at ``u[0]``) and the algebraic far-field continuation integrated
    against the kernel by adaptive quadrature.
    """
    tau = T_ref - state.t
    if not tau > 0:
        raise DomainError("moment_W needs state.t < T_ref")
    r, u = state.r, state.values
    sigma = surface_area(d)
    kern = backward_kernel(r, state.t, T_ref, d)
    body = sigma * np.trapezoid(kern * u * r ** (d - 1), r)
    inner = sigma * float(kern[0]) * float(u[0]) * r[0] ** d / d
    r_last, u_last, a = _far_field(state)
    tail = 0.0
    if u_last > 0 and math.isfinite(a):
        def cont(x):
            return np.where(x > r_last, (np.maximum(x, r_last) / r_last) ** (-a), 0.0)

        tail = (sigma * u_last * (4.0 * math.pi * tau) ** (-0.5 * d)
                * radial_integral(cont, d - 1.0, 4.0 * tau, breakpoints=(r_last,)))
    return float(body + inner + tail)


def mass_L1(state: "SimState", d: int) -> float:
    """``||u(t)||_1`` of a grid state, with the same inner/far-field treatment."""
    r, u = state.r, state.values
    sigma = surface_area(d)
    body = sigma * np.trapezoid(u * r ** (d - 1), r)
    inner = sigma * float(u[0]) * r[0] ** d / d
    r_last, u_last, a = _far_field(state)
    tail = 0.0
    if u_last > 0 and math.isfinite(a):
        tail = math.inf if a <= d else sigma * u_last * r_last**d / (a - d)
    return float(body + inner + tail)


@dataclass(frozen=True, eq=False)
class MomentSeries:
    """Time series of ``(t, W, mass_L1, sup_norm)`` for one run.

    ``W`` is NaN for entries at or beyond ``T_ref`` where the moment is
    undefined.
    """

    t: np.ndarray
    W: np.ndarray
    mass_L1: np.ndarray
    sup_norm: np.ndarray
    T_ref: float

    def __post_init__(self) -> None:
        arrays = [np.asarray(a, dtype=float) for a in (self.t, self.W, self.mass_L1, self.sup_norm)]
        if len({a.shape for a in arrays}) != 1:
            raise DomainError("series columns must have equal length")
        if np.any(np.diff(arrays[0]) <= 0):
            raise DomainError("series timestamps must be strictly increasing")
        for name, a in zip(("t", "W", "mass_L1", "sup_norm"), arrays):
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.t.size

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "W", "mass_L1", "sup_norm"])
            for row in zip(self.t, self.W, self.mass_L1, self.sup_norm):
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path: str | Path, T_ref: float) -> "MomentSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], T_ref)


class SlopeViolation(NamedTuple):
    index: int
    t: float
    slope: float
    bound: float
    shortfall: float  # 1 - slope / bound


def _valid_W(series: MomentSeries):
    ok = np.isfinite(series.W) & (series.t < series.T_ref)
    return series.t[ok], series.W[ok]


def check_moment_ode(series: MomentSeries, p: float, tol_rel: float = 1e-2) -> list[SlopeViolation]:
    """Forward-difference check of ``dW/dt >= W**p``.

    Each slope is compared with ``min(W_k, W_k+1)**p``; slopes below
    ``(1 - tol_rel)`` times that are returned.
    """
    if len(series) < 3:
        raise DomainError("check_moment_ode needs at least 3 entries")
    t, W = _valid_W(series)
    out = []
    for k in range(t.size - 1):
        slope = (W[k + 1] - W[k]) / (t[k + 1] - t[k])
        bound = min(W[k], W[k + 1]) ** p
        if slope < (1.0 - tol_rel) * bound:
            out.append(SlopeViolation(k, float(t[k]), float(slope), float(bound),
                                      float(1.0 - slope / bound) if bound > 0 else math.inf))
    return out


def lower_bound_trajectory(W0: float, p: float, t):
    """``(W0**(1-p) - (p-1) t)**(-1/(p-1))``; infinite once the bracket is <= 0."""
    base = W0 ** (1.0 - p) - (p - 1.0) * np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(base > 0, np.power(np.where(base > 0, base, 1.0), -1.0 / (p - 1.0)), np.inf)
    return out if out.ndim else float(out)


def check_lower_bound(series: MomentSeries, p: float) -> float:
    """Worst relative deficit ``max (bound - W) / bound`` of the integrated bound.

    Only entries where the bound is finite count; a value ``<= 0`` means
    the bound holds everywhere.
    """
    t, W = _valid_W(series)
    if t.size == 0 or not W[0] > 0:
        raise DomainError("check_lower_bound needs W(0) > 0")
    bound = lower_bound_trajectory(W[0], p, t - t[0])
    bound[0] = W[0]
    finite = np.isfinite(bound)
    return float(np.max((bound[finite] - W[finite]) / bound[finite]))
