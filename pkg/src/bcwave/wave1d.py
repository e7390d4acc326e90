"""Forward solver for the 1+1 dimensional wave equation on (0, 1).

Solves ``u_tt - c(x)^2 u_xx + q(x) u = 0`` with a Dirichlet source ``f`` at
``x = 0``, zero Dirichlet data at ``x = 1`` and zero initial data, using the
explicit three-level leapfrog scheme. Also provides the Dirichlet-to-Neumann
trace, energy traces, travel time and finite-speed diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BSpline

ArrayLike = np.ndarray | Sequence[float] | float

DEFAULT_CFL = 0.95


class CFLError(ValueError):
    """Raised when the time step violates ``dt * max(c) / dx <= 1``."""

    def __init__(self, cfl: float):
        self.cfl = cfl
        super().__init__(f"CFL condition violated: lambda = dt*max(c)/dx = {cfl:.6g} > 1")


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid ``x_i = i dx`` on [0, 1] with ``n_x`` nodes."""

    n_x: int

    def __post_init__(self):
        if int(self.n_x) < 3:
            raise ValueError(f"need n_x >= 3, got {self.n_x}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        x = np.arange(self.n_x) * self.dx
        x[-1] = 1.0
        return x


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``t_k = k dt``, ``k = 0 .. n_t - 1``."""

    n_t: int
    dt: float

    def __post_init__(self):
        if self.n_t < 2 or not self.dt > 0:
            raise ValueError(f"invalid time grid n_t={self.n_t}, dt={self.dt}")

    @property
    def t_max(self) -> float:
        return (self.n_t - 1) * self.dt

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    @classmethod
    def covering(cls, t_max: float, dt: float) -> "TimeGrid":
        """Smallest grid with step ``dt`` reaching at least ``t_max``."""
        n = int(np.ceil(t_max / dt - 1e-9)) + 1
        return cls(n, dt)

    def index(self, t: float) -> int:
        """Index of the level at time ``t``; ``t`` must lie on the grid."""
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k < self.n_t:
            raise ValueError(f"t={t} is not a level of the time grid (dt={self.dt})")
        return k

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid((self.n_t - 1) * factor + 1, self.dt / factor)


def time_step_for(dx: float, cfl: float = DEFAULT_CFL, align: float | None = None) -> float:
    """Largest ``dt <= cfl * dx`` such that ``align / dt`` is an integer.

    Aligning the step makes a family of observation times (for example a
    T-grid with spacing 0.05) fall exactly on time levels.
    """
    dt = cfl * dx
    if align is None:
        return dt
    return align / np.ceil(align / dt - 1e-12)


# ---------------------------------------------------------------------------
# Smooth sources


def _std_bump(tau: np.ndarray) -> np.ndarray:
    out = np.zeros_like(tau, dtype=float)
    inside = np.abs(tau) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - tau[inside] ** 2))
    return out


def _std_bump_d1(tau: np.ndarray) -> np.ndarray:
    out = np.zeros_like(tau, dtype=float)
    inside = np.abs(tau) < 1.0
    ti = tau[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti**2)) * (-2.0 * ti / (1.0 - ti**2) ** 2)
    return out


def bump(x: ArrayLike, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """C-infinity bump on (lo, hi) with peak value 1 at the midpoint."""
    x = np.asarray(x, dtype=float)
    return _std_bump((2.0 * x - lo - hi) / (hi - lo))


@dataclass(frozen=True)
class SourceSignal:
    """A boundary source with an analytic generator.

    ``kind`` is ``"bump"`` (the C-infinity bump ``exp(1 - 1/(1 - tau^2))``
    rescaled to the support window), ``"bspline"`` (a cubic B-spline on the
    five knots in ``knots``) or ``"zero"``. The generator is kept so exact
    derivatives are available to test oracles.
    """

    kind: str
    t_lo: float
    t_hi: float
    amplitude: float = 1.0
    knots: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("bump", "bspline", "zero"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind != "zero" and not self.t_hi > self.t_lo:
            raise ValueError("empty support window")
        if self.kind == "bspline" and len(self.knots) != 5:
            raise ValueError("a cubic B-spline element needs 5 knots")

    @classmethod
    def make_bump(cls, t_lo: float, t_hi: float, amplitude: float = 1.0) -> "SourceSignal":
        return cls("bump", float(t_lo), float(t_hi), float(amplitude))

    @classmethod
    def make_bspline(cls, knots: Sequence[float], amplitude: float = 1.0) -> "SourceSignal":
        knots = tuple(float(k) for k in knots)
        return cls("bspline", knots[0], knots[-1], float(amplitude), knots)

    @classmethod
    def zero(cls) -> "SourceSignal":
        return cls("zero", 0.0, 0.0, 0.0)

    @property
    def support_window(self) -> tuple[float, float]:
        return (self.t_lo, self.t_hi)

    def scaled(self, factor: float) -> "SourceSignal":
        return SourceSignal(self.kind, self.t_lo, self.t_hi, self.amplitude * factor, self.knots)

    def _tau(self, t):
        return (2.0 * np.asarray(t, dtype=float) - self.t_lo - self.t_hi) / (self.t_hi - self.t_lo)

    def _spline(self, nu: int = 0):
        b = BSpline.basis_element(self.knots, extrapolate=False)
        b = b.derivative(nu) if nu else b
        # The last knot interval is half-open, so take the left limit at the
        # right end; times within rounding of either end snap onto it. This
        # keeps clamped elements' end values on grids like k * dt.
        tol = 1e-11 * max(1.0, abs(self.t_hi))
        end = np.nextafter(self.t_hi, -np.inf)

        def ev(t):
            t = np.where(np.abs(t - self.t_hi) <= tol, end, t)
            return b(np.where(np.abs(t - self.t_lo) <= tol, self.t_lo, t))

        return ev

    def __call__(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "bump":
            return self.amplitude * _std_bump(self._tau(t))
        return self.amplitude * np.nan_to_num(self._spline()(t))

    def derivative(self, t: ArrayLike) -> np.ndarray:
        """Exact first derivative of the generator."""
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "bump":
            return self.amplitude * _std_bump_d1(self._tau(t)) * 2.0 / (self.t_hi - self.t_lo)
        return self.amplitude * np.nan_to_num(self._spline(1)(t))

    def sample(self, tg: TimeGrid) -> np.ndarray:
        return self(tg.t)


# ---------------------------------------------------------------------------
# Forward solve


@dataclass
class WaveField:
    """Space-time solution ``u[k, i] = u(t_k, x_i)``."""

    u: np.ndarray
    sgrid: SpatialGrid
    tgrid: TimeGrid

    def at_time(self, t: float) -> np.ndarray:
        return self.u[self.tgrid.index(t)]


def _as_profile(values, n_x: int, default: float, name: str) -> np.ndarray:
    if values is None:
        return np.full(n_x, default)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_x, float(arr))
    if arr.shape != (n_x,):
        raise ValueError(f"{name} must have length n_x={n_x}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def cfl_number(c, sg: SpatialGrid, tg: TimeGrid) -> float:
    cmax = float(np.max(_as_profile(c, sg.n_x, 1.0, "c")))
    return tg.dt * cmax / sg.dx


def solve_forward(
    q=None,
    c=None,
    f: SourceSignal | np.ndarray | None = None,
    sg: SpatialGrid | None = None,
    tg: TimeGrid | None = None,
    *,
    source: np.ndarray | None = None,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
) -> WaveField:
    """Leapfrog solution of the boundary source problem.

    Parameters
    ----------
    q, c
        Potential and wave speed sampled on ``sg`` (``None`` means 0 and 1).
    f
        Boundary source at ``x = 0``, a :class:`SourceSignal` or an array of
        ``n_t`` samples. ``f(t_0)`` must vanish.
    source
        Optional interior forcing ``F[k, i]``; the scheme then solves
        ``u_tt - c^2 u_xx + q u = F``. May be complex.
    initial
        Optional first two time rows ``(u^0, u^1)`` replacing the zero
        initial state (used for closed-cavity energy checks).
    """
    if sg is None or tg is None:
        raise ValueError("both a spatial and a time grid are required")
    n_x, n_t, dt, dx = sg.n_x, tg.n_t, tg.dt, sg.dx
    q = _as_profile(q, n_x, 0.0, "q")
    c = _as_profile(c, n_x, 1.0, "c")
    if np.any(c <= 0):
        raise ValueError("wave speed must be positive")
    lam = dt * float(c.max()) / dx
    if lam > 1.0 + 1e-12:
        raise CFLError(lam)

    if f is None:
        fs = np.zeros(n_t)
    elif isinstance(f, SourceSignal):
        fs = f.sample(tg)
    else:
        fs = np.asarray(f)
        if fs.shape != (n_t,):
            raise ValueError(f"source samples must have length n_t={n_t}")
    if not np.all(np.isfinite(fs)):
        raise ValueError("source has non-finite samples")
    if initial is None and abs(fs[0]) > 1e-12 * max(1.0, float(np.max(np.abs(fs)))):
        raise ValueError("source must vanish at t=0 (zero initial data)")

    dtypes = [fs.dtype, np.float64]
    if source is not None:
        source = np.asarray(source)
        if source.shape != (n_t, n_x):
            raise ValueError("interior source must have shape (n_t, n_x)")
        if not np.all(np.isfinite(source)):
            raise ValueError("interior source has non-finite entries")
        dtypes.append(source.dtype)
    u = np.zeros((n_t, n_x), dtype=np.result_type(*dtypes))

    r2 = (c[1:-1] * dt / dx) ** 2
    qdt2 = dt * dt * q[1:-1]
    if initial is not None:
        u[0], u[1] = initial[0], initial[1]
    else:
        # Taylor start: u(dt) = u(0) + dt u_t(0) + dt^2/2 u_tt(0) with zero data
        if source is not None:
            u[1, 1:-1] = 0.5 * dt * dt * source[0, 1:-1]
        u[0, 0] = fs[0]
        u[1, 0] = fs[1]
        u[:2, -1] = 0.0
    for k in range(1, n_t - 1):
        uk = u[k]
        nxt = u[k + 1]
        nxt[1:-1] = (
            2.0 * uk[1:-1]
            - u[k - 1, 1:-1]
            + r2 * (uk[2:] - 2.0 * uk[1:-1] + uk[:-2])
            - qdt2 * uk[1:-1]
        )
        if source is not None:
            nxt[1:-1] += dt * dt * source[k, 1:-1]
        nxt[0] = fs[k + 1]
        nxt[-1] = 0.0
    return WaveField(u, sg, tg)


def dalembert(f: SourceSignal, t: ArrayLike, x: ArrayLike) -> np.ndarray:
    """Exact solution for ``q = 0``, ``c = 1`` by the method of images.

    Sums ``f(t - x - 2m) - f(t + x - 2 - 2m)`` over all reflections ``m >= 0``.
    """
    t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    out = np.zeros(t.shape)
    m_max = int(np.ceil((np.max(t) - f.t_lo) / 2.0)) + 1 if f.kind != "zero" else 0
    for m in range(max(m_max, 0) + 1):
        out += f(t - x - 2 * m) - f(t + x - 2 - 2 * m)
    return out


def dalembert_dtn(f: SourceSignal, t: ArrayLike) -> np.ndarray:
    """Exact ``Lambda f(t)`` for ``q = 0``, ``c = 1``: ``-f'(t-2m) - f'(t-2-2m)`` summed."""
    t = np.asarray(t, float)
    out = np.zeros(t.shape)
    if f.kind == "zero":
        return out
    m_max = int(np.ceil((np.max(t) - f.t_lo) / 2.0)) + 1
    for m in range(m_max + 1):
        out -= f.derivative(t - 2 * m) + f.derivative(t - 2 - 2 * m)
    return out


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann trace


@dataclass
class DtnTrace:
    """Samples of ``(Lambda f)(t_k) = u_x(t_k, 0)``."""

    samples: np.ndarray
    tgrid: TimeGrid


def dtn_trace(field: WaveField, f: SourceSignal | None = None) -> DtnTrace:
    """Second-order one-sided difference ``(-3u_0 + 4u_1 - u_2) / (2dx)``."""
    u = field.u
    if u.shape[1] < 3:
        raise ValueError("need at least 3 spatial nodes for the DtN stencil")
    dx = field.sgrid.dx
    return DtnTrace((-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * dx), field.tgrid)


# ---------------------------------------------------------------------------
# Energy


def piecewise_linear_integral(y: np.ndarray, x: np.ndarray, lo: float, hi: float) -> float:
    """Exact integral over [lo, hi] of the piecewise linear interpolant of ``y``.

    Equals the trapezoid rule when ``lo`` and ``hi`` are nodes.
    """
    if hi <= lo:
        return 0.0
    inner = (x > lo) & (x < hi)
    xs = np.concatenate(([lo], x[inner], [hi]))
    ys = np.interp(xs, x, y)
    return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))


@dataclass
class EnergyTrace:
    """Energy per time level; ``flags`` marks levels with an empty window."""

    values: np.ndarray
    kind: str
    window: tuple[np.ndarray, np.ndarray] | None = None
    flags: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))


def energy_trace(
    field: WaveField,
    q=None,
    c=None,
    window: tuple[Callable | np.ndarray, Callable | np.ndarray] | None = None,
) -> EnergyTrace:
    """``E(t) = 1/2 int (c^-2 u_t^2 + u_x^2 + q u^2) dx`` per time level.

    ``window`` is ``None`` for the whole interval, or a pair ``(lo, hi)`` of
    callables of ``t`` or arrays over the time levels, clipped to [0, 1].
    The ``q u^2`` term vanishes for ``q = 0``.
    """
    sg, tg = field.sgrid, field.tgrid
    q = _as_profile(q, sg.n_x, 0.0, "q")
    c = _as_profile(c, sg.n_x, 1.0, "c")
    u = field.u
    if not np.isrealobj(u):
        raise ValueError("energy is defined for real fields")
    ut = np.gradient(u, tg.dt, axis=0, edge_order=2)
    ux = np.gradient(u, sg.dx, axis=1, edge_order=2)
    dens = ut**2 / c**2 + ux**2 + q * u**2
    x = sg.x
    if window is None:
        vals = 0.5 * np.trapezoid(dens, x, axis=1)
        return EnergyTrace(vals, "global", None, np.zeros(tg.n_t, bool))

    def _levels(w):
        arr = w(tg.t) if callable(w) else np.asarray(w, float)
        return np.clip(np.broadcast_to(arr, (tg.n_t,)).astype(float), 0.0, 1.0)

    lo, hi = _levels(window[0]), _levels(window[1])
    vals = np.zeros(tg.n_t)
    flags = hi <= lo
    for k in np.flatnonzero(~flags):
        vals[k] = 0.5 * piecewise_linear_integral(dens[k], x, lo[k], hi[k])
    return EnergyTrace(vals, "windowed", (lo, hi), flags)


def gaussian_initial_rows(
    sg: SpatialGrid, tg: TimeGrid, center: float = 0.5, width: float = 0.08, c=None
) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(u^0, u^1)`` for an interior Gaussian displacement at rest.

    ``u^1 = u^0 + dt^2/2 c^2 u^0_xx`` is the Taylor start for zero velocity;
    both ends are held at zero.
    """
    x = sg.x
    c = _as_profile(c, sg.n_x, 1.0, "c")
    u0 = np.exp(-(((x - center) / width) ** 2))
    u0[0] = u0[-1] = 0.0
    u1 = u0.copy()
    lap = (u0[2:] - 2 * u0[1:-1] + u0[:-2]) / sg.dx**2
    u1[1:-1] += 0.5 * tg.dt**2 * c[1:-1] ** 2 * lap
    return u0, u1


# ---------------------------------------------------------------------------
# Travel time and finite speed


@dataclass
class TravelTimeProfile:
    """``rho(x) = int_0^x dy / c(y)`` and its inverse ``r(t)`` tabulated on [0, rho(1)]."""

    x: np.ndarray
    rho: np.ndarray
    t_table: np.ndarray
    r_table: np.ndarray

    def r_of_t(self, t: ArrayLike) -> np.ndarray:
        """Front position ``r(t)``, clipped to [0, 1]."""
        return np.interp(np.asarray(t, float), self.t_table, self.r_table, left=0.0, right=1.0)

    def rho_at(self, x: ArrayLike) -> np.ndarray:
        return np.interp(np.asarray(x, float), self.x, self.rho)


def travel_time(c, sg: SpatialGrid, n_table: int | None = None) -> TravelTimeProfile:
    """Travel time from ``x = 0`` for the speed profile ``c``.

    Cumulative trapezoid of ``1/c`` with the Euler-Maclaurin end correction
    ``-dx^2/12 (g'(x) - g'(0))``, which keeps ``rho`` fourth-order accurate.
    The inverse is tabulated by monotone linear interpolation.
    """
    c = _as_profile(c, sg.n_x, 1.0, "c")
    if np.any(c <= 0):
        raise ValueError("travel time requires c > 0")
    x, dx = sg.x, sg.dx
    g = 1.0 / c
    rho = np.concatenate(([0.0], np.cumsum(0.5 * dx * (g[1:] + g[:-1]))))
    dg = np.gradient(g, dx, edge_order=2)
    rho -= dx * dx / 12.0 * (dg - dg[0])
    if np.any(np.diff(rho) <= 0):
        raise ValueError("travel time is not strictly increasing")
    n = n_table or sg.n_x
    t_table = np.linspace(0.0, rho[-1], n)
    r_table = np.interp(t_table, rho, x)
    return TravelTimeProfile(x, rho, t_table, r_table)


def finite_speed_leakage(
    field: WaveField,
    f: SourceSignal,
    tt: TravelTimeProfile,
    margin: float | None = None,
) -> float:
    """Largest ``|u|`` strictly beyond the causal front, relative to ``max |u|``.

    A grid point ``(t_k, x_i)`` is beyond the front when
    ``rho(x_i) > (t_k - t_lo) + margin`` with ``margin = 3 dx`` by default.
    """
    u = np.abs(field.u)
    umax = float(u.max())
    if umax == 0.0:
        return 0.0
    margin = 3.0 * field.sgrid.dx if margin is None else margin
    ahead = tt.rho[None, :] > (field.tgrid.t[:, None] - f.t_lo) + margin
    if not ahead.any():
        return 0.0
    return float(u[ahead].max() / umax)
