"""Radial method-of-lines solver for ``u_t = u_rr + (d-1)/r u_r + |u|^(p-1) u``.

Space: three-point second-order differences on ``[r_min, r_max]`` (uniform or
log-spaced nodes).  The inner node carries ``u_r = 0`` through a one-sided
second-order stencil, or, with ``symmetric_origin``, sits at ``r = 0`` where
the Laplacian is ``2d (u_1 - u_0) / h^2``.  With ``inner_boundary="pinned"``
the inner node keeps its initial value instead, which is what a stationary
singular profile needs.  The outer node is either pinned (Dirichlet) or
reflecting.

Time: classical RK4 with ``dt = min(cfl h_min^2, safety / (p sup^(p-1)))``;
the second term follows the reaction time scale into blowup.  A run is
declared blown up once ``sup u >= blowup_sup_threshold`` *and* the controller
asks for ``dt <= dt_floor``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numba
import numpy as np

from .criteria import BLOWUP, check_blowup_criterion, encode_number, decode_number
from .diagnostics import MomentSeries, mass_L1, moment_W
from .errors import DomainError
from .model import ModelParams, RadialProfile

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12
DT_FLOOR = 1e-14


@dataclass(frozen=True)
class GridConfig:
    r_min: float = 1e-3
    r_max: float = 50.0
    n_cells: int = 4096
    spacing: str = "uniform"
    symmetric_origin: bool = False
    inner_boundary: str = "neumann"

    def __post_init__(self) -> None:
        if self.spacing not in ("uniform", "log"):
            raise DomainError(f"unknown spacing {self.spacing!r}")
        if self.inner_boundary not in ("neumann", "pinned"):
            raise DomainError(f"unknown inner_boundary {self.inner_boundary!r}")
        if self.n_cells < 64:
            raise DomainError("n_cells must be >= 64")
        if self.symmetric_origin:
            if self.spacing != "uniform":
                raise DomainError("symmetric_origin needs uniform spacing")
        elif not 0 < self.r_min < self.r_max:
            raise DomainError("need 0 < r_min < r_max")
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")

    def nodes(self) -> np.ndarray:
        n = self.n_cells
        if self.symmetric_origin:
            return np.linspace(0.0, self.r_max, n + 1)
        if self.spacing == "uniform":
            return np.linspace(self.r_min, self.r_max, n + 1)
        return np.geomspace(self.r_min, self.r_max, n + 1)

    def refined(self) -> "GridConfig":
        return replace(self, n_cells=2 * self.n_cells)


@dataclass(frozen=True, eq=False)
class SimState:
    """Grid snapshot.  ``tail_exponent`` describes the continuation past ``r[-1]``."""

    t: float
    r: np.ndarray
    values: np.ndarray
    dt: float = 0.0
    tail_exponent: float = math.inf

    @property
    def sup(self) -> float:
        return float(np.max(self.values))


@dataclass(frozen=True)
class Outcome:
    """``kind`` is ``"blew_up"``, ``"survived"`` or ``"step_failure"``.

    ``time`` is the detection time, the survival horizon or the failure
    time respectively; ``sup`` the sup norm there.
    """

    kind: str
    time: float
    sup: float
    reason: str = ""


@dataclass(frozen=True, eq=False)
class SimResult:
    outcome: Outcome
    series: MomentSeries
    barrier_series: np.ndarray | None = None
    barrier_peak: float = math.nan
    snapshots: list[SimState] = field(default_factory=list)
    refinement: list[tuple[int, float]] = field(default_factory=list)
    n_cells: int = 0
    steps: int = 0

    @property
    def blew_up(self) -> bool:
        return self.outcome.kind == "blew_up"

    @property
    def t_blow(self) -> float:
        if not self.blew_up:
            raise AttributeError("run did not blow up")
        return self.outcome.time

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {"outcome": self.outcome.kind}
        if self.outcome.kind == "blew_up":
            out.update(t_blow=self.outcome.time, sup_at_detection=encode_number(self.outcome.sup))
        elif self.outcome.kind == "survived":
            out.update(horizon=self.outcome.time, final_sup=encode_number(self.outcome.sup))
        else:
            out.update(t=self.outcome.time, reason=self.outcome.reason,
                       sup=encode_number(self.outcome.sup))
        out.update(
            T_ref=encode_number(self.series.T_ref),
            records=len(self.series),
            barrier_peak=encode_number(self.barrier_peak),
            n_cells=self.n_cells,
            steps=self.steps,
            refinement=[[n, encode_number(t)] for n, t in self.refinement],
        )
        return out

    @staticmethod
    def outcome_from_summary(data: Mapping[str, Any]) -> Outcome:
        kind = data["outcome"]
        if kind == "blew_up":
            return Outcome(kind, float(data["t_blow"]), decode_number(data["sup_at_detection"]))
        if kind == "survived":
            return Outcome(kind, float(data["horizon"]), decode_number(data["final_sup"]))
        return Outcome(kind, float(data["t"]), decode_number(data["sup"]), data.get("reason", ""))


# ---------------------------------------------------------------------------
# discretisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Operator:
    r: np.ndarray
    lower: np.ndarray  # coefficient of u[j-1]
    diag: np.ndarray
    upper: np.ndarray  # coefficient of u[j+1]
    inner_mode: int  # 0: one-sided Neumann, 1: symmetric origin, 2: pinned
    inner_w: np.ndarray  # Neumann: u0 = w1 u1 + w2 u2; origin: [2d/h^2, 0]
    outer_mode: int  # 0: Neumann, 1: Dirichlet
    outer_w: np.ndarray
    far_value: float
    h2_min: float


def _one_sided_weights(h1: float, h2: float) -> np.ndarray:
    """Weights solving ``u'(r0) = 0`` for ``u0`` from the next two nodes."""
    a0 = -(2 * h1 + h2) / (h1 * (h1 + h2))
    a1 = (h1 + h2) / (h1 * h2)
    a2 = -h1 / (h2 * (h1 + h2))
    return np.array([-a1 / a0, -a2 / a0])


def build_operator(grid: GridConfig, d: int, far_field: float | None = 0.0) -> _Operator:
    r = grid.nodes()
    n = r.size - 1
    hm = np.empty(n + 1)
    hp = np.empty(n + 1)
    hm[1:] = np.diff(r)
    hp[:-1] = np.diff(r)
    hm[0], hp[-1] = hp[0], hm[-1]
    rr = np.where(r > 0, r, 1.0)
    drift = (d - 1) / rr
    s = hm + hp
    lower = 2.0 / (hm * s) - drift * hp / (hm * s)
    upper = 2.0 / (hp * s) + drift * hm / (hp * s)
    diag = -2.0 / (hm * hp) + drift * (hp - hm) / (hm * hp)
    if grid.symmetric_origin:
        inner_mode, inner_w = 1, np.array([2.0 * d / hp[0] ** 2, 0.0])
    elif grid.inner_boundary == "pinned":
        inner_mode, inner_w = 2, np.zeros(2)
    else:
        inner_mode, inner_w = 0, _one_sided_weights(hp[0], hp[1])
    if far_field is None:
        outer_mode, far_value = 0, 0.0
    else:
        outer_mode, far_value = 1, float(far_field)
    outer_w = _one_sided_weights(hm[-1], hm[-2])
    return _Operator(r, lower, diag, upper, inner_mode, inner_w, outer_mode, outer_w,
                     far_value, float(np.min(np.diff(r)) ** 2))


@numba.njit(cache=True)
def _fix_boundaries(u, inner_mode, inner_w, outer_mode, outer_w, far_value):
    n = u.size - 1
    if inner_mode == 0:
        u[0] = inner_w[0] * u[1] + inner_w[1] * u[2]
    if outer_mode == 0:
        u[n] = outer_w[0] * u[n - 1] + outer_w[1] * u[n - 2]
    else:
        u[n] = far_value


@numba.njit(cache=True, inline="always")
def _reaction(x, p):
    """``|x|^(p-1) x``, by repeated multiplication for small integer ``p``."""
    if p == 2.0:
        return abs(x) * x
    if p == 3.0:
        return x * x * x
    if p == 4.0:
        return abs(x) * x * x * x
    if p == 5.0:
        y = x * x
        return y * y * x
    return abs(x) ** (p - 1.0) * x


@numba.njit(cache=True)
def _rhs(u, lower, diag, upper, p, inner_mode, inner_w, out):
    n = u.size - 1
    for j in range(1, n):
        x = u[j]
        out[j] = lower[j] * u[j - 1] + diag[j] * x + upper[j] * u[j + 1] + _reaction(x, p)
    if inner_mode == 1:
        x = u[0]
        out[0] = inner_w[0] * (u[1] - x) + _reaction(x, p)
    else:
        out[0] = 0.0
    out[n] = 0.0


@numba.njit(cache=True)
def _rk4(u, dt, p, lower, diag, upper, inner_mode, inner_w, outer_mode, outer_w, far_value,
         k1, k2, k3, k4, tmp, out):
    m = u.size
    _rhs(u, lower, diag, upper, p, inner_mode, inner_w, k1)
    for i in range(m):
        tmp[i] = u[i] + 0.5 * dt * k1[i]
    _fix_boundaries(tmp, inner_mode, inner_w, outer_mode, outer_w, far_value)
    _rhs(tmp, lower, diag, upper, p, inner_mode, inner_w, k2)
    for i in range(m):
        tmp[i] = u[i] + 0.5 * dt * k2[i]
    _fix_boundaries(tmp, inner_mode, inner_w, outer_mode, outer_w, far_value)
    _rhs(tmp, lower, diag, upper, p, inner_mode, inner_w, k3)
    for i in range(m):
        tmp[i] = u[i] + dt * k3[i]
    _fix_boundaries(tmp, inner_mode, inner_w, outer_mode, outer_w, far_value)
    _rhs(tmp, lower, diag, upper, p, inner_mode, inner_w, k4)
    for i in range(m):
        out[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    _fix_boundaries(out, inner_mode, inner_w, outer_mode, outer_w, far_value)


@numba.njit(cache=True)
def _choose_dt(sup, p, cfl_dt, safety):
    if sup > 0.0:
        react = safety / (p * sup ** (p - 1.0))
        if react < cfl_dt:
            return react
    return cfl_dt


# status codes returned by _advance
_OK, _BLOWUP, _NONFINITE, _NEGATIVE = 0, 1, 2, 3


@numba.njit(cache=True)
def _advance(u, t, t_stop, p, lower, diag, upper, inner_mode, inner_w, outer_mode, outer_w,
             far_value, cfl_dt, safety, sup_thr, dt_floor, neg_tol, rpow, barrier_peak):
    """Integrate in place until ``t_stop`` or a terminal event.

    Returns ``(t, status, dt, steps, barrier_peak)``.
    """
    m = u.size
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    new = np.empty(m)
    steps = 0
    dt = cfl_dt
    while t < t_stop:
        sup = 0.0
        for i in range(m):
            if u[i] > sup:
                sup = u[i]
        dt = _choose_dt(sup, p, cfl_dt, safety)
        if sup >= sup_thr and dt <= dt_floor:
            return t, _BLOWUP, dt, steps, barrier_peak
        last = False
        if t + dt >= t_stop * (1.0 - 1e-15):
            dt = t_stop - t
            last = True
        _rk4(u, dt, p, lower, diag, upper, inner_mode, inner_w, outer_mode, outer_w, far_value,
             k1, k2, k3, k4, tmp, new)
        for i in range(m):
            x = new[i]
            if not np.isfinite(x):
                return t, _NONFINITE, dt, steps, barrier_peak
            if x < 0.0:
                if x < -neg_tol:
                    return t, _NEGATIVE, dt, steps, barrier_peak
                x = 0.0
            u[i] = x
            z = rpow[i] * x
            if z > barrier_peak:
                barrier_peak = z
        steps += 1
        t = t_stop if last else t + dt
    return t, _OK, dt, steps, barrier_peak


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def init_state(profile: RadialProfile, grid: GridConfig) -> SimState:
    """Sample ``profile`` on the grid nodes (unbounded kinds are rejected)."""
    if not profile.bounded:
        raise DomainError(f"{profile.kind} profile is unbounded; use truncated_singular")
    r = grid.nodes()
    values = np.asarray(profile(r), dtype=float).copy()
    if not np.all(np.isfinite(values)):
        raise DomainError("profile is not finite on the grid")
    return SimState(0.0, r, values, 0.0, profile.tail_exponent)


def barrier_max(state: SimState, params: ModelParams) -> float:
    """``max_r r^gamma u(r)`` over the grid."""
    return float(np.max(state.r ** params.gamma * state.values))


def time_derivative(state: SimState, params: ModelParams, grid: GridConfig, *,
                    far_field: float | None = 0.0) -> np.ndarray:
    """Semi-discrete right-hand side ``L_h u + |u|^(p-1) u`` (zero on algebraic boundary nodes)."""
    op = build_operator(grid, params.d, far_field)
    if op.r.shape != state.values.shape:
        raise DomainError("state does not live on this grid")
    out = np.empty_like(op.r)
    _rhs(state.values.astype(float), op.lower, op.diag, op.upper, params.p,
         op.inner_mode, op.inner_w, out)
    return out


def step(state: SimState, params: ModelParams, grid: GridConfig, *,
         far_field: float | None = 0.0, cfl_coeff: float = 0.2, safety: float = 0.1,
         dt: float | None = None) -> SimState:
    """One RK4 step of the semi-discrete system; ``dt`` defaults to the controller's choice."""
    op = build_operator(grid, params.d, far_field)
    if op.r.shape != state.values.shape:
        raise DomainError("state does not live on this grid")
    u = state.values.astype(float).copy()
    if dt is None:
        dt = _choose_dt(float(np.max(u)), params.p, cfl_coeff * op.h2_min, safety)
    m = u.size
    work = [np.empty(m) for _ in range(6)]
    _rk4(u, dt, params.p, op.lower, op.diag, op.upper, op.inner_mode, op.inner_w,
         op.outer_mode, op.outer_w, op.far_value, *work)
    new = work[-1]
    if not np.all(np.isfinite(new)):
        raise ArithmeticError("non-finite values after step")
    if np.any(new < -NEGATIVE_TOL):
        raise ArithmeticError("negative undershoot beyond tolerance")
    return SimState(state.t + dt, state.r, np.maximum(new, 0.0), dt, state.tail_exponent)


def default_T_ref(profile: RadialProfile, params: ModelParams, t_max: float) -> float:
    """1.1 x the criterion's blowup-time bound when available, else ``t_max``."""
    report = check_blowup_criterion(profile, params)
    if report.verdict == BLOWUP and not isinstance(report.blowup_time_bound, str):
        return 1.1 * report.blowup_time_bound
    return t_max


def _event_times(t_max: float, record_every: float, snapshot_times: Sequence[float]) -> np.ndarray:
    n = int(math.floor(t_max / record_every + 1e-9))
    ticks = record_every * np.arange(1, n + 1)
    times = np.concatenate([ticks, [t_max], [s for s in snapshot_times if 0 < s <= t_max]])
    times = np.unique(np.round(times, 14))
    return times[times > 0]


def _run(profile, params, grid, t_max, blowup_sup_threshold, record_every, T_ref, far_field,
         snapshot_times, cfl_coeff, safety, dt_floor) -> SimResult:
    state = init_state(profile, grid)
    if far_field == "profile":
        far_field = float(state.values[-1])
    op = build_operator(grid, params.d, far_field)
    u = state.values.copy()
    _fix_boundaries(u, op.inner_mode, op.inner_w, op.outer_mode, op.outer_w, op.far_value)
    if far_field is not None and abs(u[-1] - state.values[-1]) > 0:
        logger.debug("far-field value %g replaces profile value %g at r_max", u[-1], state.values[-1])
    tail = state.tail_exponent if far_field is None or far_field > 0 else math.inf
    rpow = op.r ** params.gamma
    snaps_wanted = {round(float(s), 14) for s in snapshot_times}

    ts, Ws, ms, sups, bars, snaps = [], [], [], [], [], []

    def record(t):
        snap = SimState(t, op.r, u.copy(), 0.0, tail)
        ts.append(t)
        Ws.append(moment_W(snap, T_ref, params.d) if t < T_ref else math.nan)
        ms.append(mass_L1(snap, params.d))
        sups.append(snap.sup)
        bars.append(float(np.max(rpow * u)))
        if round(t, 14) in snaps_wanted:
            snaps.append(snap)

    record(0.0)
    peak = bars[0]
    t, steps, total_steps = 0.0, 0, 0
    cfl_dt = cfl_coeff * op.h2_min
    outcome = None
    for t_next in _event_times(t_max, record_every, snapshot_times):
        t, status, dt, steps, peak = _advance(
            u, t, float(t_next), params.p, op.lower, op.diag, op.upper, op.inner_mode,
            op.inner_w, op.outer_mode, op.outer_w, op.far_value, cfl_dt, safety,
            blowup_sup_threshold, dt_floor, NEGATIVE_TOL, rpow, peak)
        total_steps += steps
        if status == _OK:
            record(t)
            continue
        sup = float(np.max(u))
        if status == _BLOWUP:
            outcome = Outcome("blew_up", t, sup)
            if t > ts[-1]:
                record(t)
        else:
            reason = "non-finite values" if status == _NONFINITE else "negative undershoot"
            outcome = Outcome("step_failure", t, sup, reason)
        break
    if outcome is None:
        outcome = Outcome("survived", t, float(np.max(u)))
    series = MomentSeries(np.array(ts), np.array(Ws), np.array(ms), np.array(sups), T_ref)
    return SimResult(outcome, series, np.column_stack([ts, bars]), peak, snaps,
                     [], grid.n_cells, total_steps)


def simulate(profile: RadialProfile, params: ModelParams, grid: GridConfig = GridConfig(),
             t_max: float = 1.0, blowup_sup_threshold: float = 1e8, *,
             record_every: float | None = None, T_ref: float | None = None,
             far_field: float | str | None = 0.0, snapshot_times: Sequence[float] = (),
             cfl_coeff: float = 0.2, safety: float = 0.1, dt_floor: float = DT_FLOOR,
             refine: bool = False, refine_tol: float = 0.02, max_refinements: int = 3) -> SimResult:
    """Integrate from ``profile`` until ``t_max``, blowup detection or step failure.

    ``record_every`` (default ``t_max / 200``) sets the moment-series cadence.
    ``T_ref`` is the horizon of the backward kernel (default: 1.1 x the
    criterion's blowup-time bound, else ``t_max``).  ``far_field`` pins
    ``u(r_max)`` to a value, to the profile's own value (``"profile"``), or
    makes the outer node reflecting (``None``).  With ``refine`` a
    blowup run is repeated on successively halved grids until the detection
    time moves by less than ``refine_tol`` (relative); the finest run is
    returned with the history in ``refinement``.
    """
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    if not blowup_sup_threshold > 0:
        raise DomainError("blowup_sup_threshold must be positive")
    if isinstance(far_field, str) and far_field != "profile":
        raise DomainError(f"unknown far_field mode {far_field!r}")
    if record_every is None:
        record_every = t_max / 200.0
    if T_ref is None:
        T_ref = default_T_ref(profile, params, t_max)
    args = (blowup_sup_threshold, record_every, T_ref, far_field, snapshot_times,
            cfl_coeff, safety, dt_floor)
    result = _run(profile, params, grid, t_max, *args)
    if not (refine and result.blew_up):
        return result
    history = [(grid.n_cells, result.t_blow)]
    for _ in range(max_refinements):
        grid = grid.refined()
        finer = _run(profile, params, grid, t_max, *args)
        if not finer.blew_up:
            history.append((grid.n_cells, math.nan))
            result = finer
            break
        history.append((grid.n_cells, finer.t_blow))
        change = abs(finer.t_blow - result.t_blow) / result.t_blow
        result = finer
        if change < refine_tol:
            break
    return replace(result, refinement=history)


def write_snapshots_csv(snapshots: Sequence[SimState], path: str | Path) -> None:
    """Write snapshots as long-format ``t,r,u`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "r", "u"])
        for snap in snapshots:
            for r, u in zip(snap.r, snap.values):
                writer.writerow([repr(float(snap.t)), repr(float(r)), repr(float(u))])


def write_summary_json(result: SimResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.summary(), indent=2) + "\n")
