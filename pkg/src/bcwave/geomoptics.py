"""Geometric optics solutions ``e^{i sigma phi} (a_0 + a_1/sigma + ... + a_N/sigma^N)``.

The phase is the null plane wave ``phi = t - x^1`` (direction ``v = -e_1``),
so the amplitudes travel along ``t - x^1 = const``. In the characteristic
coordinates ``s = (t + x^1)/2``, ``r = (t - x^1)/2`` the transport equations
read ``d_s a_j = (i/2) (box + q) a_{j-1}`` with ``a_j = 0`` at ``t = 0``.

Grids use ``dt = dx`` so that characteristics run along grid diagonals and
the transport integrals need no interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import RegularGridInterpolator

from .wave1d import SpatialGrid, TimeGrid, bump, solve_forward


class ResolutionError(ValueError):
    """The grid is too coarse for the requested differentiation depth or frequency."""


@dataclass(frozen=True)
class PlaneWavePhase:
    """``phi(t, x) = t + v . x`` with ``|v| = 1``."""

    v: tuple[float, ...]

    def __post_init__(self):
        if abs(np.linalg.norm(self.v) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, got |v| = {np.linalg.norm(self.v)}")

    @property
    def n(self) -> int:
        return len(self.v)

    def __call__(self, t, *x):
        return np.asarray(t, float) + sum(vi * np.asarray(xi, float) for vi, xi in zip(self.v, x))

    def eikonal_residual(self) -> float:
        """``|d_t phi|^2 - |grad phi|^2`` (constant for a plane wave)."""
        return 1.0 - float(np.dot(self.v, self.v))


ALIGNED_1D = PlaneWavePhase((-1.0,))
ALIGNED_2D = PlaneWavePhase((-1.0, 0.0))


@dataclass
class SpaceTimeBox:
    """Uniform grid with ``dt = dx`` on ``[0, T] x [x_lo, x_hi] (x [y_lo, y_hi])``."""

    h: float
    T: float
    x_lo: float
    x_hi: float
    y_lo: float | None = None
    y_hi: float | None = None

    def __post_init__(self):
        self.t = np.arange(int(round(self.T / self.h)) + 1) * self.h
        self.x = self.x_lo + np.arange(int(round((self.x_hi - self.x_lo) / self.h)) + 1) * self.h
        self.y = None
        if self.y_lo is not None:
            self.y = self.y_lo + np.arange(int(round((self.y_hi - self.y_lo) / self.h)) + 1) * self.h

    @property
    def n(self) -> int:
        return 1 if self.y is None else 2

    def mesh(self):
        if self.y is None:
            return np.meshgrid(self.t, self.x, indexing="ij")
        return np.meshgrid(self.t, self.x, self.y, indexing="ij")

    @property
    def cell(self) -> float:
        return self.h ** (self.n + 1)


# ---------------------------------------------------------------------------
# finite differences (fourth order in the interior, NaN where undefined)


def _d1(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.full_like(a, np.nan)
    out[2:-2] = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def _d2(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.full_like(a, np.nan)
    out[2:-2] = (-a[:-4] + 16 * a[1:-3] - 30 * a[2:-2] + 16 * a[3:-1] - a[4:]) / (12 * h * h)
    return np.moveaxis(out, 0, axis)


def box_operator(a: np.ndarray, h: float) -> np.ndarray:
    """``d_t^2 a - sum_i d_{x^i}^2 a`` on a ``(t, x[, y])`` grid."""
    out = _d2(a, h, 0)
    for ax in range(1, a.ndim):
        out = out - _d2(a, h, ax)
    return out


def transport_derivative(a: np.ndarray, h: float) -> np.ndarray:
    """``(d_t + d_{x^1}) a``, the derivative along the rays."""
    return _d1(a, h, 0) + _d1(a, h, 1)


# ---------------------------------------------------------------------------
# amplitudes


def _diagonal_integral(g: np.ndarray) -> np.ndarray:
    """``int_0^t g(t', x - t + t') dt'`` for every grid point, on a dt = dx grid.

    Diagonals that leave the box on the left are integrated from the box
    edge; the integrands here vanish there (see :func:`transport_step`).
    """
    nt, nx = g.shape[:2]
    out = np.zeros_like(g)
    # diagonal d holds points (k, k + d); d ranges over -(nt-1)..(nx-1)
    for d in range(-(nt - 1), nx):
        k0 = max(0, -d)
        k1 = min(nt, nx - d)
        if k1 - k0 < 2:
            continue
        k = np.arange(k0, k1)
        vals = g[k, k + d]
        if k1 - k0 >= 3:
            cum = cumulative_simpson(vals.real, dx=1.0, axis=0, initial=0.0)
            if np.iscomplexobj(vals):
                cum = cum + 1j * cumulative_simpson(vals.imag, dx=1.0, axis=0, initial=0.0)
        else:
            cum = np.concatenate((np.zeros((1,) + vals.shape[1:]), 0.5 * (vals[1:] + vals[:-1])))
        out[k, k + d] = cum
    return out


def transport_step(a_prev: np.ndarray, q: np.ndarray, h: float) -> np.ndarray:
    """``a_j = (i/2) int (box + q) a_{j-1}`` along the rays from ``t = 0``.

    ``a_prev`` and ``q`` are sampled on the same ``dt = dx`` grid. The
    integrand must vanish near the left edge of the box (rays entering from
    ``x < x_lo`` carry nothing), which holds when ``q`` and the amplitudes are
    supported to the right of it. Points where the fourth-order stencil does
    not reach are set from the nearest interior values by zero padding, so
    amplitudes should vanish in a two-cell shell.
    """
    if a_prev.ndim == 2 and min(a_prev.shape) < 9:
        raise ResolutionError("need at least 9 points per axis for the fourth-order stencil")
    g = np.nan_to_num(box_operator(a_prev, h)) + q * a_prev
    return 0.5j * h * _diagonal_integral(g)


def check_resolution(chi_width: float, h: float, depth: int, points: int = 8) -> None:
    """Each differentiation level needs ``points`` samples across a profile feature."""
    need = chi_width / (points * max(1, depth))
    if h > need:
        raise ResolutionError(f"grid step {h:g} too coarse for width {chi_width:g} at depth {depth}; use h <= {need:.3g}")


@dataclass
class GOAnsatz:
    sigma: float
    phase: PlaneWavePhase
    amplitudes: list[np.ndarray]
    grid: SpaceTimeBox
    info: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.amplitudes) - 1

    def envelope(self) -> np.ndarray:
        """``A = sum_j sigma^{-j} a_j``."""
        if self.sigma == 0:
            return sum(self.amplitudes[1:], self.amplitudes[0].astype(complex))
        return sum(a * self.sigma**-j for j, a in enumerate(self.amplitudes))

    def field(self) -> np.ndarray:
        phi = self.phase(*self.grid.mesh())
        return np.exp(1j * self.sigma * phi) * self.envelope()


def amplitude_stack(
    chi: Callable[[np.ndarray], np.ndarray],
    q: Callable,
    N: int,
    grid: SpaceTimeBox,
    eta: Callable[[np.ndarray], np.ndarray] | None = None,
) -> list[np.ndarray]:
    """``a_0 = chi(t - x^1) eta(x^2)`` and ``a_1, ..., a_N`` by transport."""
    if not 0 <= N <= 4:
        raise ValueError("N must be between 0 and 4")
    mesh = grid.mesh()
    a0 = chi(mesh[0] - mesh[1]).astype(complex)
    if grid.n == 2:
        a0 = a0 * (eta(mesh[2]) if eta is not None else 1.0)
    qv = q(*mesh[1:])
    stack = [a0]
    for _ in range(N):
        stack.append(transport_step(stack[-1], qv, grid.h))
    return stack


def build_ansatz(
    sigma: float,
    N: int,
    chi: Callable,
    q: Callable,
    grid: SpaceTimeBox,
    eta: Callable | None = None,
    stack: list[np.ndarray] | None = None,
) -> GOAnsatz:
    phase = ALIGNED_1D if grid.n == 1 else ALIGNED_2D
    stack = stack if stack is not None else amplitude_stack(chi, q, N, grid, eta)
    return GOAnsatz(float(sigma), phase, stack[: N + 1], grid)


def conjugated_residual(ans: GOAnsatz, q: Callable) -> np.ndarray:
    """``e^{-i sigma phi} (box + q) (e^{i sigma phi} A)``.

    For the aligned null phase this is ``(box + q) A + 2 i sigma (d_t + d_x) A``:
    the phase is differentiated exactly and only the slowly varying envelope
    by finite differences.
    """
    A = ans.envelope()
    mesh = ans.grid.mesh()
    h = ans.grid.h
    return box_operator(A, h) + q(*mesh[1:]) * A + 2j * ans.sigma * transport_derivative(A, h)


def residual_norm(ans: GOAnsatz, q: Callable, trim: int = 4) -> float:
    """L2 norm over the box interior (``trim`` cells dropped on every side)."""
    r = conjugated_residual(ans, q)
    sl = tuple(slice(trim, -trim) for _ in range(r.ndim))
    return float(np.sqrt(np.sum(np.abs(r[sl]) ** 2) * ans.grid.cell))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class ScalingReport:
    sigma: np.ndarray
    norms: np.ndarray
    slope: float
    N: int


def residual_scaling(
    chi: Callable,
    q: Callable,
    N: int,
    sigma_list: Sequence[float],
    grid: SpaceTimeBox,
    eta: Callable | None = None,
) -> ScalingReport:
    """Residual norms over a geometric sigma sweep and their log-log slope."""
    stack = amplitude_stack(chi, q, N, grid, eta)
    norms = np.array([residual_norm(build_ansatz(s, N, chi, q, grid, eta, stack), q) for s in sigma_list])
    return ScalingReport(np.asarray(sigma_list, float), norms, loglog_slope(sigma_list, norms), N)


# ---------------------------------------------------------------------------
# exact oscillation check of the conjugation formula


def conjugation_defect(a: np.ndarray, phase: PlaneWavePhase, sigma: float, grid: SpaceTimeBox) -> float:
    """Compare the raw stencil on ``e^{i sigma phi} a`` with the conjugated formula.

    ``e^{-i sigma phi} box(e^{i sigma phi} a) = box a + i sigma (2 phi_t d_t
    - 2 grad phi . grad + box phi) a - sigma^2 (phi_t^2 - |grad phi|^2) a``.
    Returns the maximum relative difference on the interior.
    """
    mesh = grid.mesh()
    h = grid.h
    ph = phase(*mesh)
    raw = np.exp(-1j * sigma * ph) * box_operator(np.exp(1j * sigma * ph) * a, h)
    lin = 2 * _d1(a, h, 0)
    for i, vi in enumerate(phase.v):
        lin = lin - 2 * vi * _d1(a, h, i + 1)
    formula = box_operator(a, h) + 1j * sigma * lin - sigma**2 * phase.eikonal_residual() * a
    sl = tuple(slice(4, -4) for _ in range(a.ndim))
    return float(np.abs(raw - formula)[sl].max() / max(np.abs(formula[sl]).max(), 1e-300))


# ---------------------------------------------------------------------------
# remainder and nonvanishing (n = 1)


@dataclass
class Certificate:
    certified: bool
    sigma: float
    amplitude: complex
    value: complex
    remainder: complex
    history: list = field(default_factory=list)
    # boundary source realizing the value, sampled on the ansatz t-grid
    trace_t: np.ndarray | None = None
    trace: np.ndarray | None = None


def _remainder_at(ans: GOAnsatz, q_fn: Callable, sg: SpatialGrid, T: float, cfl: float = 0.95):
    """Solve ``(box + q) r = -(box + q)(e^{i sigma phi} A)`` on (0,1), zero data.

    The forcing is interpolated from the ansatz grid onto the solver grid.
    Returns the solver field.
    """
    g = ans.grid
    forcing = -np.exp(1j * ans.sigma * ans.phase(*g.mesh())) * np.nan_to_num(conjugated_residual(ans, q_fn))
    dt = cfl * sg.dx
    nt = int(np.ceil(T / dt - 1e-9)) + 1
    tg = TimeGrid(nt, T / (nt - 1))
    tt, xx = np.meshgrid(tg.t, sg.x, indexing="ij")
    pts = np.stack([tt.ravel(), xx.ravel()], axis=-1)
    re, im = (
        RegularGridInterpolator((g.t, g.x), part, bounds_error=False, fill_value=0.0)(pts).reshape(tt.shape)
        for part in (forcing.real, forcing.imag)
    )
    return solve_forward(q_fn(sg.x), None, np.zeros(nt), sg, tg, source=re + 1j * im)


def remainder_norm(ans: GOAnsatz, q_fn: Callable, sg: SpatialGrid, T: float) -> float:
    """``||r_sigma(T, .)||_{L^2(0,1)}`` of the remainder."""
    r = _remainder_at(ans, q_fn, sg, T)
    return float(np.sqrt(np.trapezoid(np.abs(r.u[-1]) ** 2, sg.x)))


def ray_profile(x0: float, T: float, width: float = 0.3, offset: float = 0.0) -> Callable:
    """``chi`` so that the ray ``t - x = T - x0`` carries ``chi(offset)``.

    ``chi(tau) = bump`` of half-width ``width`` centred at ``T - x0 - offset``.
    """
    c = T - x0 - offset
    return lambda tau: bump(tau, c - width, c + width)


def certify_nonvanishing(
    x0: float,
    T: float,
    q_fn: Callable,
    *,
    N: int = 1,
    sigmas: Sequence[float] = (8, 16, 32, 64, 128, 256, 512),
    width: float = 0.3,
    offset: float = 0.0,
    h: float = 0.0025,
    n_x: int = 401,
) -> Certificate:
    """Find a solution with ``|u(T, x0)| > |a_0(T, x0)| / 2`` by raising sigma.

    ``u = e^{i sigma phi} A + r`` where ``A`` is the geometric optics
    envelope on the ray through ``(T, x0)`` and ``r`` the remainder from the
    wave solver. Its boundary trace at ``x = 0`` is the source realizing the
    value. ``offset`` moves the ray off the profile's centre; with the
    profile vanishing on the ray the certificate must fail.
    """
    if not 0 < x0 < 1:
        raise ValueError("x0 must be interior")
    if T < 1:
        raise ValueError("need T >= 1")
    chi = ray_profile(x0, T, width, offset)
    lo = -0.1
    # a few rows past T so that the stencils at t = T are interior
    grid = SpaceTimeBox(h, T + 8 * h, lo, 1.1)
    qx = lambda x: np.where((x >= 0) & (x <= 1), q_fn(np.clip(x, 0, 1)), 0.0)
    stack = amplitude_stack(chi, qx, N, grid)
    sg = SpatialGrid(n_x)
    it = int(round(T / h))
    ix = int(round((x0 - lo) / h))
    a0 = complex(stack[0][it, ix])
    history = []
    for sigma in sigmas:
        ans = build_ansatz(sigma, N, chi, qx, grid, stack=stack)
        r = _remainder_at(ans, qx, sg, T)
        r_val = complex(np.interp(x0, sg.x, r.u[-1].real) + 1j * np.interp(x0, sg.x, r.u[-1].imag))
        w_val = complex(np.exp(1j * sigma * (T - x0)) * ans.envelope()[it, ix])
        u_val = w_val + r_val
        history.append((sigma, abs(u_val), abs(r_val)))
        if abs(a0) > 0 and abs(u_val) > 0.5 * abs(a0):
            return Certificate(True, sigma, a0, u_val, r_val, history, *_boundary_trace(ans, lo))
    return Certificate(False, float(sigmas[-1]), a0, u_val, r_val, history, *_boundary_trace(ans, lo))


def _boundary_trace(ans: GOAnsatz, lo: float):
    g = ans.grid
    i0 = int(round(-lo / g.h))
    return g.t.copy(), np.exp(1j * ans.sigma * g.t) * ans.envelope()[:, i0]
