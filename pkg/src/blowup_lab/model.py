"""Model parameters, regime flags and radial initial data.

Everything here is immutable.  Profiles are callables on radii ``r >= 0``
and accept numpy arrays; they also expose the small amount of structure the
quadrature layer needs (a leading power at the origin, kink locations, and a
far-field decay exponent).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, SingularityError
from .numerics import log_gamma

REGIME_TOL = 1e-12


def _as_exponent(p: Any) -> tuple[float, Fraction | None]:
    if isinstance(p, bool):
        raise DomainError(f"invalid exponent p={p!r}")
    if isinstance(p, (int, Fraction)):
        return float(p), Fraction(p)
    if isinstance(p, str):
        frac = Fraction(p.strip())
        return float(frac), frac
    return float(p), None


def gamma_exponent(p: float) -> float:
    """Return the scaling exponent ``2/(p-1)``."""
    p = float(p)
    if not p > 1.0:
        raise DomainError(f"exponent must satisfy p > 1, got p={p}")
    return 2.0 / (p - 1.0)


def singular_constant(d: int, p: float) -> float:
    """Amplitude ``c`` of the singular stationary solution ``c |x|^(-2/(p-1))``.

    Defined by ``c**(p-1) = gamma * (d - 2 - gamma)``, which needs ``d >= 3``
    and ``p > d/(d-2)``.
    """
    gam = gamma_exponent(p)
    p = float(p)
    if d < 3 or not (d - 2.0 - gam) > 0.0:
        raise DomainError("singular solution requires p > d/(d−2) and d >= 3")
    return (gam * (d - 2.0 - gam)) ** (1.0 / (p - 1.0))


def surface_area(d: int) -> float:
    """Area of the unit sphere in R^d, ``2 pi^(d/2) / Gamma(d/2)``."""
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    return math.exp(math.log(2.0) + 0.5 * d * math.log(math.pi) - log_gamma(0.5 * d))


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d`` and exponent ``p`` with the derived ``gamma`` and ``c``.

    ``p`` may be given as an int, a :class:`fractions.Fraction` or a string
    such as ``"5/3"``; in those cases regime boundaries are tested exactly.
    """

    d: int
    p: float
    p_exact: Fraction | None = field(default=None, repr=False, compare=False)
    gamma: float = field(init=False)
    c_sing: float | None = field(init=False)

    def __post_init__(self) -> None:
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        p_float, p_frac = _as_exponent(self.p)
        if self.p_exact is not None:
            p_frac = Fraction(self.p_exact)
            p_float = float(p_frac)
        object.__setattr__(self, "p", p_float)
        object.__setattr__(self, "p_exact", p_frac)
        object.__setattr__(self, "gamma", gamma_exponent(p_float))
        try:
            c = singular_constant(self.d, p_float)
        except DomainError:
            c = None
        object.__setattr__(self, "c_sing", c)

    @property
    def regime(self) -> "RegimeFlags":
        return classify_regime(self.d, self.p_exact if self.p_exact is not None else self.p)

    def require_singular(self) -> float:
        if self.c_sing is None:
            raise DomainError("singular solution requires p > d/(d−2)")
        return self.c_sing


@dataclass(frozen=True)
class RegimeFlags:
    fujita_subcritical: bool
    fujita_critical: bool
    singular_solution_exists: bool


def classify_regime(d: int, p: Any) -> RegimeFlags:
    """Position of ``(d, p)`` relative to the Fujita exponent and ``d/(d-2)``.

    The sign of ``d(p-1) - 2`` decides sub/critical.  Exact rational
    arithmetic is used when ``p`` is an int, Fraction or ratio string,
    otherwise the comparison carries a ``1e-12`` tolerance.
    """
    p_float, p_frac = _as_exponent(p)
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    if not p_float > 1.0:
        raise DomainError(f"exponent must satisfy p > 1, got p={p_float}")
    d = int(d)
    if p_frac is not None:
        excess = d * (p_frac - 1) - 2
        sub, crit = excess < 0, excess == 0
        sing = d >= 3 and p_frac > Fraction(d, d - 2)
    else:
        excess = d * (p_float - 1.0) - 2.0
        sub = excess < -REGIME_TOL
        crit = abs(excess) <= REGIME_TOL
        sing = d >= 3 and (d - 2.0 - 2.0 / (p_float - 1.0)) > REGIME_TOL
    return RegimeFlags(bool(sub), bool(crit), bool(sing))


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------


class RadialProfile:
    """Nonnegative radial datum ``u0(|x|)``.

    Subclasses implement :meth:`regular_part`, the bounded factor
    ``u0(r) * r**singular_power``.  Quadratures integrate that factor against
    ``r**(d-1-singular_power)`` so the origin singularity is handled
    analytically.
    """

    kind: str = ""
    singular_power: float = 0.0
    bounded: bool = True

    def regular_part(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0):
            raise DomainError("radius must be nonnegative")
        if self.singular_power > 0:
            if np.any(arr == 0):
                raise SingularityError(f"{self.kind} profile is unbounded at r = 0")
            out = self.regular_part(arr) * arr ** (-self.singular_power)
        else:
            out = self.regular_part(arr)
        return out if out.ndim else float(out)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Radii where the profile is not smooth or changes scale."""
        return ()

    @property
    def tail_exponent(self) -> float:
        """Exponent ``a`` with ``u0(r) ~ r**(-a)`` as ``r -> inf`` (inf for fast decay)."""
        return math.inf

    def rescaled(self, lam: float, gamma: float) -> "RadialProfile":
        """Profile ``lam**gamma * u0(lam * r)``, the equation's scaling."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Singular(RadialProfile):
    """``N * c * r**(-gamma)``: a multiple of the singular stationary solution."""

    scale: float
    params: ModelParams
    kind = "singular"
    bounded = False

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise DomainError("scale must be nonnegative")
        self.params.require_singular()

    @property
    def singular_power(self) -> float:  # type: ignore[override]
        return self.params.gamma

    @property
    def amplitude(self) -> float:
        return self.scale * self.params.require_singular()

    def regular_part(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.amplitude)

    @property
    def tail_exponent(self) -> float:
        return self.params.gamma

    def rescaled(self, lam, gamma):
        return self

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale}


@dataclass(frozen=True)
class TruncatedSingular(RadialProfile):
    """``min(N * c * r**(-gamma), H)``."""

    scale: float
    cap: float
    params: ModelParams
    kind = "truncated_singular"

    def __post_init__(self) -> None:
        if self.scale < 0 or not self.cap > 0:
            raise DomainError("truncated_singular needs scale >= 0 and cap > 0")
        self.params.require_singular()

    @property
    def knee(self) -> float:
        """Radius where the cap takes over."""
        amp = self.scale * self.params.require_singular()
        return (amp / self.cap) ** (1.0 / self.params.gamma) if amp > 0 else 0.0

    def regular_part(self, r):
        r = np.asarray(r, dtype=float)
        amp = self.scale * self.params.require_singular()
        with np.errstate(divide="ignore"):
            sing = np.where(r > 0, amp * np.power(np.where(r > 0, r, 1.0), -self.params.gamma), np.inf)
        return np.minimum(sing, self.cap)

    @property
    def breakpoints(self):
        return (self.knee,) if self.knee > 0 else ()

    @property
    def tail_exponent(self):
        return self.params.gamma

    def rescaled(self, lam, gamma):
        return TruncatedSingular(self.scale, self.cap * lam**gamma, self.params)

    def to_dict(self):
        return {"kind": self.kind, "scale": self.scale, "cap": self.cap}


@dataclass(frozen=True)
class Gaussian(RadialProfile):
    """``A * exp(-r**2 / sigma**2)``."""

    amplitude: float
    width: float
    kind = "gaussian"

    def __post_init__(self) -> None:
        if self.amplitude < 0 or not self.width > 0:
            raise DomainError("gaussian needs amplitude >= 0 and width > 0")

    def regular_part(self, r):
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-(r / self.width) ** 2)

    @property
    def breakpoints(self):
        # smooth, but quadrature panels must resolve the bump at every kernel width
        return tuple(self.width * k for k in (1.0, 2.0, 4.0, 8.0))

    def rescaled(self, lam, gamma):
        return Gaussian(self.amplitude * lam**gamma, self.width / lam)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "width": self.width}


@dataclass(frozen=True)
class Indicator(RadialProfile):
    """``A`` on the ball ``r < R``, zero outside."""

    amplitude: float
    radius: float
    kind = "indicator"

    def __post_init__(self) -> None:
        if self.amplitude < 0 or not self.radius > 0:
            raise DomainError("indicator needs amplitude >= 0 and radius > 0")

    def regular_part(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.radius, self.amplitude, 0.0)

    @property
    def breakpoints(self):
        return (self.radius,)

    def rescaled(self, lam, gamma):
        return Indicator(self.amplitude * lam**gamma, self.radius / lam)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "radius": self.radius}


@dataclass(frozen=True)
class Constant(RadialProfile):
    level: float
    kind = "constant"

    def __post_init__(self) -> None:
        if self.level < 0:
            raise DomainError("constant level must be nonnegative")

    def regular_part(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.level)

    @property
    def tail_exponent(self):
        return 0.0

    def rescaled(self, lam, gamma):
        return Constant(self.level * lam**gamma)

    def to_dict(self):
        return {"kind": self.kind, "level": self.level}


@dataclass(frozen=True)
class PowerTail(RadialProfile):
    """``A * min(1, (r/knee)**(-a))``: flat core, algebraic tail."""

    amplitude: float
    exponent: float
    knee: float = 1.0
    kind = "power_tail"

    def __post_init__(self) -> None:
        if self.amplitude < 0 or self.exponent < 0 or not self.knee > 0:
            raise DomainError("power_tail needs amplitude >= 0, exponent >= 0, knee > 0")

    def regular_part(self, r):
        r = np.asarray(r, dtype=float)
        x = np.maximum(r / self.knee, 1.0)
        return self.amplitude * x ** (-self.exponent)

    @property
    def breakpoints(self):
        return (self.knee,)

    @property
    def tail_exponent(self):
        return self.exponent

    def rescaled(self, lam, gamma):
        return PowerTail(self.amplitude * lam**gamma, self.exponent, self.knee / lam)

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude,
                "exponent": self.exponent, "knee": self.knee}


@dataclass(frozen=True, eq=False)
class Sampled(RadialProfile):
    """Tabulated profile, linear in ``log r`` between nodes.

    Below the first node the first value is held; beyond the last node the
    profile continues as ``u_last * (r / r_last)**(-tail_exponent)``.
    """

    radii: np.ndarray
    values: np.ndarray
    tail: float = math.inf
    kind = "sampled"

    def __post_init__(self) -> None:
        r = np.asarray(self.radii, dtype=float)
        u = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != u.shape or r.size < 2:
            raise DomainError("sampled profile needs matching 1-d arrays of length >= 2")
        if np.any(np.diff(r) <= 0):
            raise DomainError("sampled radii must be strictly increasing")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise DomainError("sampled values must be finite and nonnegative")
        if self.tail < 0:
            raise DomainError("tail exponent must be nonnegative")
        r.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", u)
        # r = 0 is allowed as a node; log-interpolation starts at the first positive one
        pos = r > 0
        object.__setattr__(self, "_logr", np.log(r[pos]))
        object.__setattr__(self, "_upos", u[pos])

    def regular_part(self, r):
        r = np.asarray(r, dtype=float)
        r_last, u_last = self.radii[-1], self.values[-1]
        with np.errstate(divide="ignore"):
            lr = np.log(np.maximum(r, 1e-300))
        inside = np.interp(lr, self._logr, self._upos)
        if math.isinf(self.tail):
            outside = np.zeros_like(r)
        else:
            outside = u_last * np.power(np.maximum(r, r_last) / r_last, -self.tail)
        return np.where(r <= r_last, inside, outside)

    @property
    def breakpoints(self):
        return tuple(float(x) for x in self.radii if x > 0)

    @property
    def tail_exponent(self):
        return self.tail

    def rescaled(self, lam, gamma):
        return Sampled(self.radii / lam, self.values * lam**gamma, self.tail)

    def to_dict(self):
        return {"kind": self.kind, "r": self.radii.tolist(), "u": self.values.tolist(),
                "tail_exponent": None if math.isinf(self.tail) else self.tail}


def eval_profile(profile: RadialProfile, r):
    """Pointwise value of ``profile`` at radius ``r`` (scalar or array)."""
    return profile(r)


def load_sampled_csv(path: str | Path, tail_exponent: float = math.inf) -> Sampled:
    """Read a two-column ``r,u`` CSV (header optional) into a sampled profile."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header
    data = np.array(rows, dtype=float)
    return Sampled(data[:, 0], data[:, 1], tail_exponent)


def profile_from_dict(spec: Mapping[str, Any], params: ModelParams | None = None,
                      base_dir: Path | None = None) -> RadialProfile:
    """Build a profile from its config record, e.g.
    ``{"kind": "truncated_singular", "scale": 2.0, "cap": 10.0}``."""
    kind = spec.get("kind")
    if kind in ("singular", "truncated_singular") and params is None:
        raise DomainError(f"{kind} profile needs model parameters")
    if kind == "singular":
        return Singular(float(spec.get("scale", 1.0)), params)
    if kind == "truncated_singular":
        return TruncatedSingular(float(spec.get("scale", 1.0)), float(spec["cap"]), params)
    if kind == "gaussian":
        return Gaussian(float(spec.get("amplitude", 1.0)), float(spec.get("width", 1.0)))
    if kind == "indicator":
        return Indicator(float(spec.get("amplitude", 1.0)), float(spec.get("radius", 1.0)))
    if kind == "constant":
        return Constant(float(spec.get("level", 0.0)))
    if kind == "power_tail":
        return PowerTail(float(spec.get("amplitude", 1.0)), float(spec["exponent"]),
                         float(spec.get("knee", 1.0)))
    if kind == "sampled":
        tail = spec.get("tail_exponent")
        tail = math.inf if tail is None else float(tail)
        if "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_sampled_csv(path, tail)
        return Sampled(np.asarray(spec["r"], float), np.asarray(spec["u"], float), tail)
    raise DomainError(f"unknown profile kind {kind!r}")
