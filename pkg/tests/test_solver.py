from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.errors import DomainError
from blowup_lab.model import Constant, Gaussian, ModelParams, Sampled, Singular, TruncatedSingular
from blowup_lab.solver import (
    GridConfig, SimResult, SimState, barrier_max, build_operator, init_state, simulate, step,
    time_derivative, write_snapshots_csv,
)

P43 = ModelParams(4, 3)
GRID = GridConfig()
SMALL = GridConfig(r_max=10.0, n_cells=256)


def scalar_rk4(y, dt, p):
    f = lambda v: v**p  # noqa: E731
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def test_grid_config_validation():
    with pytest.raises(DomainError):
        GridConfig(r_min=2.0, r_max=1.0)
    with pytest.raises(DomainError):
        GridConfig(n_cells=32)
    with pytest.raises(DomainError):
        GridConfig(spacing="cubic")
    with pytest.raises(DomainError):
        GridConfig(spacing="log", symmetric_origin=True)
    r = GridConfig(r_min=0.01, r_max=10, n_cells=100, spacing="log").nodes()
    assert r[0] == pytest.approx(0.01) and r[-1] == pytest.approx(10) and r.size == 101
    assert GridConfig(symmetric_origin=True).nodes()[0] == 0.0


def test_init_state_examples():
    r = GRID.nodes()
    assert np.all(init_state(Constant(0.0), GRID).values == 0.0)
    np.testing.assert_allclose(init_state(TruncatedSingular(2.0, 10.0, P43), GRID).values,
                               np.minimum(2.0 / r, 10.0), rtol=1e-15)
    np.testing.assert_allclose(init_state(Gaussian(1.0, 1.0), GRID).values, np.exp(-r * r),
                               rtol=1e-15)
    with pytest.raises(DomainError):
        init_state(Singular(1.0, P43), GRID)


def test_step_zero_is_fixed_point():
    r = GRID.nodes()
    out = step(SimState(0.0, r, np.zeros_like(r)), P43, GRID)
    assert np.all(out.values == 0.0) and out.t > 0


@pytest.mark.parametrize("K, p", [(1.0, 3.0), (2.5, 2.0), (0.7, 2.5)])
def test_step_constant_matches_scalar_rk4(K, p):
    P = ModelParams(4, p)
    r = GRID.nodes()
    state = SimState(0.0, r, np.full_like(r, K))
    out = step(state, P, GRID, far_field=None)
    expected = scalar_rk4(K, out.dt, p)
    np.testing.assert_allclose(out.values, expected, rtol=1e-12)
    assert out.dt == pytest.approx(min(0.2 * ((50 - 1e-3) / 4096) ** 2, 0.1 / (p * K ** (p - 1))), rel=1e-12)


def test_uC_is_discretely_stationary():
    r = GRID.nodes()
    uc = Singular(1.0, P43)(r)
    du = time_derivative(SimState(0.0, r, uc), P43, GRID)
    window = (r >= 0.5) & (r <= 5.0)
    assert np.max(np.abs(du[window])) <= 1e-4 * uc.max()


def test_uC_stays_stationary_with_pinned_ends():
    grid = GridConfig(r_min=0.2, r_max=10.0, n_cells=2048, inner_boundary="pinned")
    r = grid.nodes()
    prof = Sampled(r, Singular(1.0, P43)(r))
    times = [0.25, 0.5, 0.75, 1.0]
    res = simulate(prof, P43, grid, t_max=1.0, record_every=0.25, far_field="profile",
                   snapshot_times=times)
    assert res.outcome.kind == "survived" and len(res.snapshots) == 4
    for snap in res.snapshots:
        du = time_derivative(snap, P43, grid, far_field=float(snap.values[-1]))
        window = (snap.r >= 0.5) & (snap.r <= 5.0)
        assert np.max(np.abs(du[window])) <= 1e-3 * snap.sup


@pytest.mark.parametrize("spacing", ["uniform", "log"])
def test_operator_second_order(spacing):
    # radial Laplacian of exp(-r^2) in d dims is (4 r^2 - 2 d) exp(-r^2)
    d = 3
    errs = []
    for n in (400, 800, 1600):
        grid = GridConfig(r_min=0.05, r_max=8.0, n_cells=n, spacing=spacing)
        op = build_operator(grid, d)
        r = op.r
        u = np.exp(-r * r)
        lap = op.lower[1:-1] * u[:-2] + op.diag[1:-1] * u[1:-1] + op.upper[1:-1] * u[2:]
        exact = (4 * r[1:-1] ** 2 - 2 * d) * u[1:-1]
        errs.append(np.max(np.abs(lap - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


@pytest.mark.parametrize("grid", [GridConfig(r_max=12.0, n_cells=1024),
                                  GridConfig(r_max=12.0, n_cells=1024, symmetric_origin=True)])
def test_small_data_follows_heat_flow(grid):
    # amplitude 1e-6: the reaction is negligible and u(0, t) = A (1 + 4t)^{-d/2}
    A, d, t_end = 1e-6, 3, 0.5
    res = simulate(Gaussian(A, 1.0), ModelParams(d, 3), grid, t_max=t_end,
                   snapshot_times=[t_end], T_ref=1.0)
    u0 = res.snapshots[-1].values[0]
    assert u0 == pytest.approx(A * (1 + 4 * t_end) ** (-d / 2), rel=2e-4)


def test_barrier_max_examples():
    r = GRID.nodes()
    delta = 0.37
    state = SimState(0.0, r, delta * Singular(1.0, P43)(r))
    assert barrier_max(state, P43) == pytest.approx(delta * P43.c_sing, rel=1e-14)
    assert barrier_max(SimState(0.0, r, np.zeros_like(r)), P43) == 0.0
    assert barrier_max(init_state(TruncatedSingular(0.5, 10.0, P43), GRID), P43) == \
        pytest.approx(0.5, rel=1e-14)


def test_simulate_zero_survives():
    res = simulate(Constant(0.0), P43, SMALL, t_max=0.5)
    assert res.outcome.kind == "survived" and res.outcome.sup == 0.0
    assert res.outcome.time == 0.5 and len(res.series) == 201


def test_simulate_blowup_outcome_invariants():
    res = simulate(TruncatedSingular(2.0, 10.0, P43), P43, GridConfig(r_max=10.0, n_cells=1024),
                   t_max=1.0, blowup_sup_threshold=1e6)
    assert res.blew_up
    assert res.outcome.sup >= 1e6
    assert np.all(np.diff(res.series.t) > 0)
    assert res.series.t[-1] == res.t_blow
    with pytest.raises(AttributeError):
        simulate(Constant(0.0), P43, SMALL, t_max=0.1).t_blow


def test_simulate_refinement_history():
    res = simulate(TruncatedSingular(2.0, 10.0, P43), P43, GridConfig(r_max=10.0, n_cells=512),
                   t_max=1.0, refine=True)
    ns = [n for n, _ in res.refinement]
    assert ns[0] == 512 and all(b == 2 * a for a, b in zip(ns, ns[1:]))
    tb = [t for _, t in res.refinement]
    assert abs(tb[-1] - tb[-2]) / tb[-2] < 0.02 and res.n_cells == ns[-1]


def test_step_failure_is_reported_not_raised():
    res = simulate(Gaussian(1.0, 1.0), P43, SMALL, t_max=0.1, record_every=0.1, cfl_coeff=5.0)
    assert res.outcome.kind == "step_failure"
    assert res.outcome.reason in ("non-finite values", "negative undershoot")


def test_simulate_validation():
    with pytest.raises(DomainError):
        simulate(Gaussian(1.0, 1.0), P43, SMALL, t_max=0.0)
    with pytest.raises(DomainError):
        simulate(Gaussian(1.0, 1.0), P43, SMALL, t_max=1.0, far_field="elsewhere")
    with pytest.raises(DomainError):
        simulate(Singular(1.0, P43), P43, SMALL, t_max=1.0)


def test_far_field_modes():
    prof = Constant(1.0)
    P = ModelParams(4, 2)
    reflect = simulate(prof, P, SMALL, t_max=0.2, far_field=None, snapshot_times=[0.2], T_ref=1.0)
    # spatially constant: y' = y^2 from y(0)=1 gives 1/(1-t)
    np.testing.assert_allclose(reflect.snapshots[0].values, 1 / 0.8, rtol=1e-10)
    pinned = simulate(prof, P, SMALL, t_max=0.2, far_field="profile", snapshot_times=[0.2],
                      T_ref=1.0)
    assert pinned.snapshots[0].values[-1] == 1.0
    zero = simulate(prof, P, SMALL, t_max=0.2, snapshot_times=[0.2], T_ref=1.0)
    assert zero.snapshots[0].values[-1] == 0.0


@settings(max_examples=10)
@given(a=st.floats(0.1, 2.0), extra=st.floats(0.0, 1.0), w=st.floats(0.5, 2.0))
def test_comparison_principle(a, extra, w):
    P = ModelParams(3, 2)
    t = [0.05, 0.1, 0.2]
    lo = simulate(Gaussian(a, w), P, SMALL, t_max=0.2, snapshot_times=t, T_ref=1.0)
    hi = simulate(Gaussian(a + extra, 1.2 * w), P, SMALL, t_max=0.2, snapshot_times=t, T_ref=1.0)
    for u, v in zip(lo.snapshots, hi.snapshots):
        assert np.all(u.values <= v.values + 1e-8 * v.sup)
        assert np.all(u.values >= -1e-12)


@pytest.mark.parametrize("delta", [0.3, 0.8])
def test_barrier_persistence(delta):
    res = simulate(TruncatedSingular(delta, 10.0, P43), P43, GridConfig(n_cells=2048),
                   t_max=10.0, record_every=0.05)
    assert res.outcome.kind == "survived"
    assert np.all(res.barrier_series[:, 1] < delta * P43.c_sing * (1 + 1e-3))
    assert res.barrier_peak < delta * P43.c_sing * (1 + 1e-3)


def test_outputs_roundtrip(tmp_path):
    res = simulate(Gaussian(1.0, 1.0), P43, SMALL, t_max=0.1, snapshot_times=[0.05, 0.1])
    summary = json.loads(json.dumps(res.summary()))
    assert SimResult.outcome_from_summary(summary) == res.outcome
    path = tmp_path / "snap.csv"
    write_snapshots_csv(res.snapshots, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (2 * SMALL.nodes().size, 3)
    assert path.read_text().splitlines()[0] == "t,r,u"
    np.testing.assert_array_equal(data[data[:, 0] == 0.1, 2], res.snapshots[1].values)
