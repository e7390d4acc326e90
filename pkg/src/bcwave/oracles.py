"""Interior-field references for checking the boundary-data algorithms.

The solver sees the whole field, the inverse algorithms must not. Everything
that reads ``u(t, x)`` directly lives here so the reconstruction pipeline can
be audited for not importing it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .wave1d import SourceSignal, SpatialGrid, TimeGrid, solve_forward


def interior_kernel(q, c, f: SourceSignal, h: SourceSignal, sg: SpatialGrid, tg: TimeGrid) -> np.ndarray:
    """``W[k, j] = int_0^1 u^f(t_k) u^h(t_j) dx`` by the trapezoid rule."""
    uf = solve_forward(q, c, f, sg, tg).u
    uh = solve_forward(q, c, h, sg, tg).u
    w = np.full(sg.n_x, sg.dx)
    w[0] = w[-1] = 0.5 * sg.dx
    return (uf * w) @ uh.T


def interior_diagonal(q, c, f: SourceSignal, sg: SpatialGrid, tg: TimeGrid) -> np.ndarray:
    u = solve_forward(q, c, f, sg, tg).u
    return np.trapezoid(u**2, sg.x, axis=1)


def truncation_energy(q, c, f: SourceSignal, s: float, T: float, sg: SpatialGrid, tg: TimeGrid) -> float:
    """``||(1_(0,s) - 1) u^f(T)||^2``, integrating the piecewise-linear field from ``s`` to 1."""
    u = solve_forward(q, c, f, sg, tg).at_time(T)
    cum = cumulative_trapezoid(u**2, sg.x, initial=0.0)
    # the field is linear between nodes, so integrate u^2 exactly on the cut cell
    i = min(int(np.floor(s / sg.dx)), sg.n_x - 2)
    x0, x1 = sg.x[i], sg.x[i + 1]
    a, b = u[i], u[i + 1]
    us = a + (b - a) * (s - x0) / (x1 - x0)
    part = (x1 - s) * (us**2 + us * b + b**2) / 3.0
    return float(part + cum[-1] - cum[i + 1])


def interior_waves(
    q, c, sources: Sequence[SourceSignal], T_grid: Sequence[float], x_eval: np.ndarray,
    sg: SpatialGrid, tg: TimeGrid,
) -> np.ndarray:
    """``u^{h_j}(T_n, x_i)`` as an array ``J x n_x_eval x n_T`` (linear interpolation in x)."""
    out = np.empty((len(sources), len(x_eval), len(T_grid)))
    for j, h in enumerate(sources):
        u = solve_forward(q, c, h, sg, tg)
        for n, T in enumerate(T_grid):
            out[j, :, n] = np.interp(x_eval, sg.x, u.at_time(T))
    return out


def interior_products(q, c, sources, T_grid, x_eval, sg, tg) -> np.ndarray:
    """``B[j, k, i, n] = u^{h_j}(T_n, x_i) u^{h_k}(T_n, x_i)``."""
    v = interior_waves(q, c, sources, T_grid, x_eval, sg, tg)
    return np.einsum("jin,kin->jkin", v, v)
