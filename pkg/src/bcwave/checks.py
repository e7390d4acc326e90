"""Invariant suite behind ``bcwave check``.

Each check returns a :class:`CheckResult` with the measured value and the
threshold it is held to. The suite runs at desk scale (a few minutes on one
core); the acceptance tests cover the same ground at full size.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import geomoptics as go
from . import lightray as lr
from . import reconstruct as rc
from .config import RunConfig
from .connecting import assemble_dtn, blagoveshchenskii
from .control import project
from .oracles import interior_kernel, truncation_energy
from .wave1d import (
    SourceSignal,
    SpatialGrid,
    TimeGrid,
    bump,
    dalembert,
    dtn_trace,
    energy_trace,
    finite_speed_leakage,
    gaussian_initial_rows,
    solve_forward,
    time_step_for,
    travel_time,
)

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float = 0.0


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def check_dalembert() -> CheckResult:
    f = SourceSignal.make_bump(0.1, 0.4)
    sg = SpatialGrid(801)
    tg = TimeGrid.covering(1.8, time_step_for(sg.dx))
    u = solve_forward(None, None, f, sg, tg).u
    tt, xx = np.meshgrid(tg.t, sg.x, indexing="ij")
    err = _rel(u, dalembert(f, tt, xx))
    return CheckResult("dalembert_l2", err < 1e-3, err, 1e-3)


def check_linearity() -> CheckResult:
    sg = SpatialGrid(201)
    tg = TimeGrid.covering(1.5, time_step_for(sg.dx))
    q = 5 * bump(sg.x, 0.2, 0.8)
    f, g = SourceSignal.make_bump(0.1, 0.4), SourceSignal.make_bump(0.3, 0.9)
    lhs = solve_forward(q, None, 2.0 * f.sample(tg) - 0.5 * g.sample(tg), sg, tg).u
    rhs = 2.0 * solve_forward(q, None, f, sg, tg).u - 0.5 * solve_forward(q, None, g, sg, tg).u
    err = float(np.abs(lhs - rhs).max() / np.abs(rhs).max())
    return CheckResult("linearity", err < 1e-12, err, 1e-12)


def check_energy() -> CheckResult:
    sg = SpatialGrid(801)
    tg = TimeGrid.covering(2.0, time_step_for(sg.dx))
    u = solve_forward(None, None, None, sg, tg, initial=gaussian_initial_rows(sg, tg))
    e = energy_trace(u).values
    drift = float(np.abs(e - e[0]).max() / e[0])
    return CheckResult("energy_drift", drift < 1e-4, drift, 1e-4)


def check_finite_speed() -> CheckResult:
    sg = SpatialGrid(801)
    c = 1 + 0.5 * sg.x
    tg = TimeGrid.covering(2.0, time_step_for(sg.dx / 1.5))
    f = SourceSignal.make_bump(0.1, 0.4)
    leak = finite_speed_leakage(solve_forward(None, c, f, sg, tg), f, travel_time(c, sg))
    return CheckResult("finite_speed_variable_c", leak < 1e-4, leak, 1e-4)


def check_travel_time() -> CheckResult:
    sg = SpatialGrid(2001)
    err = float(np.abs(travel_time(1 + sg.x, sg).rho - np.log1p(sg.x)).max())
    return CheckResult("travel_time_log", err < 1e-8, err, 1e-8)


def check_dtn_causality() -> CheckResult:
    sg = SpatialGrid(401)
    tg = TimeGrid.covering(1.0, time_step_for(sg.dx))
    f = SourceSignal.make_bump(0.3, 0.5)
    lf = dtn_trace(solve_forward(None, None, f, sg, tg)).samples
    val = float(np.abs(lf[tg.t < 0.3]).max() / np.abs(lf).max())
    return CheckResult("dtn_causality", val < 1e-8, val, 1e-8)


def check_connecting(cfg: RunConfig) -> list[CheckResult]:
    sg = SpatialGrid(801)
    tg = TimeGrid.covering(4.0, time_step_for(sg.dx))
    q = 5 * bump(sg.x, 0.2, 0.8)
    f, h = cfg.source("source"), cfg.source("source2")
    dtn = assemble_dtn(q, None, sg, tg)
    w_fh = blagoveshchenskii(f, h, dtn).W
    w_hf = blagoveshchenskii(h, f, dtn).W
    sym = float(np.abs(w_fh - w_hf.T).max() / np.abs(w_fh).max())
    n = w_fh.shape[0]
    ref = interior_kernel(q, None, f, h, sg, TimeGrid(n, tg.dt))
    err = float(np.abs(w_fh - ref).max() / np.abs(ref).max())
    return [
        CheckResult("kernel_symmetry", sym < 1e-10, sym, 1e-10),
        CheckResult("kernel_vs_interior", err < 1e-3, err, 1e-3),
    ]


def check_control(cfg: RunConfig) -> list[CheckResult]:
    sg = SpatialGrid(401)
    tg = rc.working_time_grid(sg.dx, t_max=2.4)
    q = 5 * bump(sg.x, 0.2, 0.8)
    f = SourceSignal.make_bump(0.05, 1.15)
    T = 1.2
    dtn = assemble_dtn(q, None, sg, tg)
    worst = 0.0
    for s in cfg["control"]["s_list"]:
        sol = project(f, s, T, dtn, M=cfg["control"]["M"] or 64)
        ref = truncation_energy(q, None, f, s, T, sg, tg)
        worst = max(worst, abs(sol.residual - ref) / ref)
    return [CheckResult("control_residual", worst < 0.05, worst, 0.05)]


def check_zero_potential(cfg: RunConfig) -> CheckResult:
    sg = SpatialGrid(401)
    tg = rc.working_time_grid(sg.dx)
    dtn = assemble_dtn(np.zeros(sg.n_x), None, sg, tg)
    res, _, _ = rc.reconstruct(dtn, workers=cfg["workers"])
    val = res.metrics()["max_abs_q_est"]
    return CheckResult("reconstruct_zero", bool(val < 0.5), val, 0.5)


def check_go_slopes() -> list[CheckResult]:
    q = lambda x: 5 * bump(x, 0.2, 0.8)
    chi = lambda tau: bump(tau, 0.1, 0.7)
    grid = go.SpaceTimeBox(0.005, 1.2, -0.1, 1.3)
    out = []
    for N in (1, 2):
        rep = go.residual_scaling(chi, q, N, [8, 16, 32, 64, 128], grid)
        dev = abs(rep.slope + N)
        out.append(CheckResult(f"go_slope_N{N}", dev < 0.3, rep.slope, -N))
    return out


def check_lightray() -> list[CheckResult]:
    q = lr.SpacetimePotential.sample(lr.bump_phantom((1.0, 0.0, 0.0), 0.6), 2.0, 1.0, 33, 33)
    nyq = np.pi / q.dx
    rng = np.random.default_rng(0)
    scale = abs(lr.direct_transform(q, 0.0, (0.0, 0.0)))
    worst, admissible = 0.0, True
    for _ in range(24):
        eta = rng.uniform(-nyq / 2, nyq / 2, 2)
        if not 0 < np.hypot(*eta) <= nyq / 2:
            continue
        v = lr.direction_for(rng.uniform(-1, 1), eta)
        y, data = lr.ray_data(q, v)
        smp = lr.fourier_slice(y, data, v, eta)
        admissible &= abs(smp.tau) <= np.hypot(*eta) + 1e-12
        worst = max(worst, abs(smp.value - lr.direct_transform(q, smp.tau, eta)) / scale)
    return [
        CheckResult("slice_vs_dft", worst < 0.01, worst, 0.01),
        CheckResult("cone_admissible", bool(admissible), float(admissible), 1.0),
    ]


def run_suite(cfg: RunConfig, progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    checks = [
        check_dalembert,
        check_linearity,
        check_energy,
        check_finite_speed,
        check_travel_time,
        check_dtn_causality,
        lambda: check_connecting(cfg),
        lambda: check_control(cfg),
        lambda: check_zero_potential(cfg),
        check_go_slopes,
        check_lightray,
    ]
    results = []
    for fn in checks:
        t0 = time.perf_counter()
        got = fn()
        got = got if isinstance(got, list) else [got]
        dt = (time.perf_counter() - t0) / len(got)
        for r in got:
            r.seconds = round(dt, 3)
            results.append(r)
            if progress:
                progress(r)
    return results


def report(results: list[CheckResult]) -> dict:
    return {"passed": all(r.passed for r in results), "checks": [asdict(r) for r in results]}
