import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcwave.wave1d import (
    CFLError,
    SourceSignal,
    SpatialGrid,
    TimeGrid,
    bump,
    dalembert,
    dalembert_dtn,
    dtn_trace,
    energy_trace,
    finite_speed_leakage,
    solve_forward,
    time_step_for,
    travel_time,
)


def grids(n_x=201, t_max=1.5, cfl=0.95):
    sg = SpatialGrid(n_x)
    return sg, TimeGrid.covering(t_max, time_step_for(sg.dx, cfl))


def test_grid_endpoints_exact():
    for n in (3, 7, 401, 1001):
        x = SpatialGrid(n).x
        assert x[0] == 0.0 and x[-1] == 1.0
    with pytest.raises(ValueError):
        SpatialGrid(2)


def test_time_step_alignment():
    dt = time_step_for(1 / 400, 0.95, align=0.0125)
    assert dt <= 0.95 / 400
    assert abs(0.0125 / dt - round(0.0125 / dt)) < 1e-9


def test_zero_source_gives_zero_field():
    sg, tg = grids()
    u = solve_forward(5 * bump(sg.x), None, SourceSignal.zero(), sg, tg).u
    assert not u.any()
    assert not dtn_trace(solve_forward(None, None, SourceSignal.zero(), sg, tg)).samples.any()


def test_boundary_rows_and_initial_row():
    sg, tg = grids()
    f = SourceSignal.make_bump(0.1, 0.4)
    u = solve_forward(None, None, f, sg, tg).u
    assert not u[0].any()
    np.testing.assert_array_equal(u[:, 0], f.sample(tg))
    assert not u[:, -1].any()


def test_cfl_violation_reports_lambda():
    sg = SpatialGrid(101)
    tg = TimeGrid(50, 1.2 * sg.dx)
    with pytest.raises(CFLError) as err:
        solve_forward(None, None, SourceSignal.make_bump(0.1, 0.3), sg, tg)
    assert err.value.cfl == pytest.approx(1.2)


def test_nonfinite_input_rejected():
    sg, tg = grids(51)
    q = np.zeros(sg.n_x)
    q[3] = np.nan
    with pytest.raises(ValueError):
        solve_forward(q, None, SourceSignal.make_bump(0.1, 0.3), sg, tg)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), lo=st.floats(0.02, 0.5))
def test_linearity_in_source(a, b, lo):
    sg, tg = grids(101, 1.2)
    q = 5 * bump(sg.x, 0.2, 0.8)
    f, g = SourceSignal.make_bump(lo, lo + 0.3), SourceSignal.make_bump(0.2, 0.9)
    lhs = solve_forward(q, None, a * f.sample(tg) + b * g.sample(tg), sg, tg).u
    rhs = a * solve_forward(q, None, f, sg, tg).u + b * solve_forward(q, None, g, sg, tg).u
    scale = max(np.abs(rhs).max(), 1e-300)
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale + 1e-300


def test_unit_courant_is_exact_for_free_waves():
    sg = SpatialGrid(201)
    tg = TimeGrid.covering(1.5, sg.dx)
    f = SourceSignal.make_bump(0.1, 0.4)
    u = solve_forward(None, None, f, sg, tg).u
    tt, xx = np.meshgrid(tg.t, sg.x, indexing="ij")
    assert np.abs(u - dalembert(f, tt, xx)).max() < 1e-12


def test_dtn_trace_matches_analytic():
    errs = []
    for n in (401, 801):
        sg, tg = grids(n, 1.8)
        f = SourceSignal.make_bump(0.1, 0.5)
        lf = dtn_trace(solve_forward(None, None, f, sg, tg)).samples
        ex = dalembert_dtn(f, tg.t)
        errs.append(np.abs(lf - ex).max() / np.abs(ex).max())
    assert errs[1] < 5e-3
    assert errs[0] / errs[1] > 3.5


def test_dtn_causality():
    sg, tg = grids(401, 1.0)
    f = SourceSignal.make_bump(0.3, 0.5)
    lf = dtn_trace(solve_forward(5 * bump(sg.x), None, f, sg, tg)).samples
    assert np.abs(lf[tg.t < 0.3]).max() < 1e-8 * np.abs(lf).max()


def test_richardson_self_oracle():
    f = SourceSignal.make_bump(0.1, 0.5)
    rows = []
    for n in (201, 401, 801):
        sg = SpatialGrid(n)
        r = (n - 1) // 200
        tg = TimeGrid(190 * r + 1, 0.95 * sg.dx)  # same final time on all three
        rows.append(solve_forward(5 * bump(sg.x, 0.2, 0.8), None, f, sg, tg).u[-1][::r])
    rich = (4 * rows[1] - rows[0]) / 3
    assert np.linalg.norm(rich - rows[2]) / np.linalg.norm(rows[2]) < 1e-3


def test_travel_time_examples():
    sg = SpatialGrid(401)
    tt = travel_time(None, sg)
    np.testing.assert_allclose(tt.rho, sg.x, atol=1e-14)
    np.testing.assert_allclose(tt.r_of_t([0.0, 0.25, 0.5]), [0.0, 0.25, 0.5], atol=1e-12)
    assert travel_time(2.0 * np.ones(sg.n_x), sg).rho[-1] == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        travel_time(np.zeros(sg.n_x), sg)


def test_travel_time_inverse_round_trip():
    sg = SpatialGrid(401)
    tt = travel_time(1 + 0.5 * sg.x, sg, n_table=4001)
    np.testing.assert_allclose(tt.r_of_t(tt.rho), sg.x, atol=1e-5)
    assert np.all(np.diff(tt.rho) > 0) and tt.rho[0] == 0


def test_windowed_energy_nonincreasing_behind_front():
    sg = SpatialGrid(801)
    c = 1 + 0.5 * sg.x
    # stop before the pulse reaches x = 1 (travel time 2 ln 1.5 ~ 0.81)
    tg = TimeGrid.covering(0.8, time_step_for(sg.dx / 1.5))
    tt = travel_time(c, sg)
    # start the window after the source has switched off, at the tail
    f = SourceSignal.make_bump(0.02, 0.2)
    field = solve_forward(None, c, f, sg, tg)
    lo = lambda t: tt.r_of_t(np.maximum(t - 0.2, 0.0))
    e = energy_trace(field, None, c, (lo, np.ones_like)).values
    k0 = np.searchsorted(tg.t, 0.25)
    # the last level's u_t is a one-sided difference
    inc = np.diff(e[k0:-2])
    assert inc.max() <= 1e-6 * e[k0]


def test_energy_zero_field_and_flags():
    sg, tg = grids(51, 0.5)
    field = solve_forward(None, None, SourceSignal.zero(), sg, tg)
    assert not energy_trace(field).values.any()
    tr = energy_trace(field, window=(np.full(tg.n_t, 0.6), np.full(tg.n_t, 0.4)))
    assert tr.flags.all() and not tr.values.any()


def test_leakage_constant_speed():
    sg, tg = grids(801, 2.0)
    f = SourceSignal.make_bump(0.1, 0.4)
    field = solve_forward(None, None, f, sg, tg)
    assert finite_speed_leakage(field, f, travel_time(None, sg)) < 1e-6
    zero = solve_forward(None, None, SourceSignal.zero(), sg, tg)
    assert finite_speed_leakage(zero, f, travel_time(None, sg)) == 0.0


def test_bspline_source_endpoints():
    f = SourceSignal.make_bspline([0.0, 0.0, 0.0, 0.0, 0.3])
    assert f(0.0) == pytest.approx(1.0)
    assert abs(f(0.3)) < 1e-30 and f(-0.1) == 0.0
    g = SourceSignal.make_bspline([0.1, 0.2, 0.3, 0.4, 0.5])
    assert g(0.3) == pytest.approx(2 / 3)
