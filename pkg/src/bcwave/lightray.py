"""Light ray transform on (0,T) x R^2 and Fourier slicing on the spacelike cone.

``L q(y, v) = int q(s, y + s v) ds`` over light rays ``s -> (s, y + s v)``
with ``|v| = 1``. Integrating in ``y`` against ``exp(-i eta . y)`` gives
``q_hat(-eta . v, eta)``, so ray data determine the space-time Fourier
transform on ``|tau| <= |eta|``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from . import io


class CoverageError(ValueError):
    """The y-grid does not contain the shadow of the support."""


@dataclass
class SpacetimePotential:
    """Samples ``q[k, i, j] = q(t_k, x_i, y_j)`` on ``[0, T] x [-X, X]^2``."""

    q: np.ndarray
    T: float
    X: float

    def __post_init__(self):
        self.q = np.array(self.q, float)
        if self.q.ndim != 3:
            raise ValueError("expected a (t, x, y) array")
        if not np.all(np.isfinite(self.q)):
            raise ValueError("potential has non-finite samples")
        shell = np.ones(self.q.shape, bool)
        shell[2:-2, 2:-2, 2:-2] = False
        if np.abs(self.q[shell]).max(initial=0.0) > 0:
            raise ValueError("potential must vanish on a two-cell boundary shell")

    @property
    def dt(self) -> float:
        return self.T / (self.q.shape[0] - 1)

    @property
    def dx(self) -> float:
        return 2 * self.X / (self.q.shape[1] - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.q.shape[0])

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.X, self.X, self.q.shape[1])

    @classmethod
    def sample(cls, fn: Callable, T: float, X: float, n_t: int, n_x: int) -> "SpacetimePotential":
        t = np.linspace(0.0, T, n_t)
        x = np.linspace(-X, X, n_x)
        tt, xx, yy = np.meshgrid(t, x, x, indexing="ij", sparse=True)
        return cls(np.broadcast_to(fn(tt, xx, yy), (n_t, n_x, n_x)), T, X)

    def shifted(self, di: int, dj: int) -> "SpacetimePotential":
        """Translate by whole cells in x and y (zero fill)."""
        out = np.zeros_like(self.q)
        n = self.q.shape[1]
        src = self.q[:, max(0, -di) : n - max(0, di), max(0, -dj) : n - max(0, dj)]
        out[:, max(0, di) : n - max(0, -di), max(0, dj) : n - max(0, -dj)] = src
        return SpacetimePotential(out, self.T, self.X)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, float)
    if v.shape != (2,) or abs(np.hypot(*v) - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector in R^2, got {v}")
    return v


def minkowski_norm(tangent) -> float:
    """``g(b, b) = -b_0^2 + |b'|^2`` for the signature ``(-, +, +)``."""
    b = np.asarray(tangent, float)
    return float(-b[0] ** 2 + np.dot(b[1:], b[1:]))


def light_ray_transform(q: SpacetimePotential, y, v) -> np.ndarray:
    """``int_0^T q(s, y + s v) ds`` for one or many base points ``y``.

    ``y`` has shape ``(2,)`` or ``(m, 2)``. Composite trapezoid with step
    ``min(dt, dx) / 2`` and trilinear interpolation of the samples; points
    outside the grid count as zero.
    """
    v = _unit(v)
    y = np.atleast_2d(np.asarray(y, float))
    n_s = int(np.ceil(q.T / (0.5 * min(q.dt, q.dx)))) + 1
    s = np.linspace(0.0, q.T, n_s)
    pos = y[:, None, :] + s[None, :, None] * v  # m, n_s, 2
    coords = np.stack([
        np.broadcast_to(s / q.dt, pos.shape[:2]),
        (pos[..., 0] + q.X) / q.dx,
        (pos[..., 1] + q.X) / q.dx,
    ])
    vals = map_coordinates(q.q, coords.reshape(3, -1), order=1, mode="constant", cval=0.0).reshape(pos.shape[:2])
    out = np.trapezoid(vals, s, axis=1)
    return out if out.size > 1 else out.reshape(())


# ---------------------------------------------------------------------------
# n = 1 sanity routine


def null_separable(q0: Callable, q1: Callable) -> Callable:
    """``q(t, x) = q0((t + x)/2) q1((t - x)/2)`` in null coordinates."""
    return lambda t, x: q0(0.5 * (t + x)) * q1(0.5 * (t - x))


def light_ray_transform_1d(q: Callable, y: np.ndarray, v: int, t_span: tuple[float, float], n_s: int = 4001) -> np.ndarray:
    """``int q(s, y + v s) ds`` over ``s`` in ``t_span`` for ``v = +-1``."""
    if v not in (1, -1):
        raise ValueError("in one space dimension v is +1 or -1")
    s = np.linspace(*t_span, n_s)
    y = np.atleast_1d(np.asarray(y, float))
    return np.trapezoid(q(s[None, :], y[:, None] + v * s[None, :]), s, axis=1)


# ---------------------------------------------------------------------------
# Fourier slicing


@dataclass
class SpectralSample:
    tau: float
    eta: tuple[float, float]
    value: complex


def direction_for(a: float, eta) -> np.ndarray:
    """Unit ``v`` with ``-eta . v = a |eta|``: ``v = -a eta/|eta| + sqrt(1 - a^2) w``.

    ``w`` is ``eta/|eta|`` rotated by +90 degrees.
    """
    eta = np.asarray(eta, float)
    ne = np.hypot(*eta)
    if ne == 0:
        raise ValueError("eta must be nonzero")
    if not -1.0 <= a <= 1.0:
        raise ValueError("a must lie in [-1, 1]")
    e = eta / ne
    w = np.array([-e[1], e[0]])
    return -a * e + np.sqrt(max(0.0, 1.0 - a * a)) * w


def ray_data(q: SpacetimePotential, v, y_grid: np.ndarray | None = None, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """``L q(y, v)`` on a square y-grid with the same spacing as x.

    By default the grid is the shadow ``supp q - s v`` of the support's
    bounding box plus two cells, snapped to the x lattice. Raises
    :class:`CoverageError` if the data do not vanish on the grid edge.
    """
    v = _unit(v)
    if y_grid is None:
        y_grid = _shadow_grid(q, v)
    yy1, yy2 = np.meshgrid(y_grid, y_grid, indexing="ij")
    data = light_ray_transform(q, np.stack([yy1.ravel(), yy2.ravel()], axis=1), v).reshape(yy1.shape)
    edge = np.concatenate((data[0], data[-1], data[:, 0], data[:, -1]))
    peak = np.abs(data).max()
    if peak > 0 and np.abs(edge).max() > tol * peak:
        raise CoverageError("ray data do not vanish on the y-grid edge")
    return y_grid, data


def _shadow_grid(q: SpacetimePotential, v: np.ndarray) -> np.ndarray:
    nz = np.nonzero(q.q)
    if not nz[0].size:
        return q.x
    t_lo, t_hi = q.t[nz[0].min()] - q.dt, q.t[nz[0].max()] + q.dt
    lo = min(q.x[nz[1].min()], q.x[nz[2].min()]) - q.dx
    hi = max(q.x[nz[1].max()], q.x[nz[2].max()]) + q.dx
    reach = max(abs(t_lo), abs(t_hi)) * max(abs(v[0]), abs(v[1]))
    k_lo = int(np.floor((lo - reach + q.X) / q.dx)) - 2
    k_hi = int(np.ceil((hi + reach + q.X) / q.dx)) + 2
    return -q.X + q.dx * np.arange(k_lo, k_hi + 1)


def fourier_slice(y_grid: np.ndarray, data: np.ndarray, v, eta) -> SpectralSample:
    """``sum_y exp(-i eta . y) L q(y, v) dy^2`` at ``tau = -eta . v``."""
    eta = np.asarray(eta, float)
    dy = y_grid[1] - y_grid[0]
    e1 = np.exp(-1j * eta[0] * y_grid)
    e2 = np.exp(-1j * eta[1] * y_grid)
    val = e1 @ data @ e2 * dy * dy
    # |eta . v| <= |eta| for unit v; clip the last-ulp overshoot
    ne = float(np.hypot(*eta))
    tau = float(np.clip(-eta @ _unit(v), -ne, ne))
    return SpectralSample(tau, (float(eta[0]), float(eta[1])), complex(val))


def direct_transform(q: SpacetimePotential, tau: float, eta) -> complex:
    """Riemann sum of ``q exp(-i (t tau + x . eta))`` (the DFT oracle at one point)."""
    t, x = q.t, q.x
    et = np.exp(-1j * tau * t)
    e1 = np.exp(-1j * eta[0] * x)
    e2 = np.exp(-1j * eta[1] * x)
    return complex(np.einsum("kij,k,i,j->", q.q, et, e1, e2) * q.dt * q.dx * q.dx)


# ---------------------------------------------------------------------------
# cone inversion


def frequency_grid(q: SpacetimePotential):
    n_t, n_x = q.q.shape[0], q.q.shape[1]
    tau = 2 * np.pi * np.fft.fftfreq(n_t, q.dt)
    eta = 2 * np.pi * np.fft.fftfreq(n_x, q.dx)
    return tau, eta


def cone_mask(q: SpacetimePotential, band: float = 0.5) -> np.ndarray:
    """``|tau| <= |eta| <= band * Nyquist`` on the FFT grid.

    The closed cone contains the origin, whose value (the total integral of
    ``q``) any single direction's ray data determine.
    """
    tau, eta = frequency_grid(q)
    tt, e1, e2 = np.meshgrid(tau, eta, eta, indexing="ij")
    ne = np.hypot(e1, e2)
    nyq = np.pi / q.dx
    return (np.abs(tt) <= ne + 1e-12) & (ne <= band * nyq + 1e-12)


def _phase(q: SpacetimePotential) -> np.ndarray:
    """Factor turning continuous ``q_hat`` samples into ``fftn`` coefficients."""
    _, eta = frequency_grid(q)
    e1, e2 = np.meshgrid(eta, eta, indexing="ij")
    return np.exp(-1j * q.X * (e1 + e2))[None] / (q.dt * q.dx * q.dx)


@dataclass
class ConeRecovery:
    q_cone: np.ndarray
    q_cone_ref: np.ndarray
    mask: np.ndarray
    samples: list[SpectralSample]
    spectrum: np.ndarray

    @property
    def rel_error(self) -> float:
        ref = np.linalg.norm(self.q_cone_ref)
        return float(np.linalg.norm(self.q_cone - self.q_cone_ref) / ref) if ref > 0 else float(np.linalg.norm(self.q_cone))

    def residual_rows(self, q: SpacetimePotential):
        """Rows ``tau, eta1, eta2, abs_err, rel_err`` against the DFT oracle."""
        ref = np.fft.fftn(q.q) / _phase(q)
        tau, eta = frequency_grid(q)
        scale = np.abs(ref[self.mask]).max() if self.mask.any() else 1.0
        rows = []
        for k, i, j in zip(*np.nonzero(self.mask)):
            err = abs(self.spectrum[k, i, j] - ref[k, i, j])
            rows.append((tau[k], eta[i], eta[j], err, err / scale))
        return rows


def invert_on_cone(q: SpacetimePotential, band: float = 0.5, workers: int = 1, hermitian: bool = True) -> ConeRecovery:
    """Populate ``q_hat`` on the spacelike cone from ray data and invert.

    Only the ray transform of ``q`` enters ``q_cone``; ``q_cone_ref`` is the
    oracle built from the direct DFT restricted to the same mask. With
    ``hermitian`` (q is real) each conjugate pair ``(tau, eta)``,
    ``(-tau, -eta)`` is sliced once, halving the ray work.
    """
    mask = cone_mask(q, band)
    tau, eta = frequency_grid(q)
    n_t, n_x = mask.shape[0], mask.shape[1]
    spec = np.zeros(q.q.shape, complex)
    jobs = []
    for k, i, j in zip(*np.nonzero(mask)):
        if hermitian and ((-k) % n_t, (-i) % n_x, (-j) % n_x) < (k, i, j):
            continue
        ev = np.array([eta[i], eta[j]])
        if not ev.any():
            jobs.append(((k, i, j), ev, np.array([1.0, 0.0])))
            continue
        a = float(np.clip(tau[k] / np.hypot(*ev), -1.0, 1.0))
        jobs.append(((k, i, j), ev, direction_for(a, ev)))

    def one(job):
        key, ev, v = job
        y, data = ray_data(q, v)
        return key, fourier_slice(y, data, v, ev)

    samples = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for (k, i, j), smp in pool.map(one, jobs):
            spec[k, i, j] = smp.value
            samples.append(smp)
            if hermitian:
                spec[(-k) % n_t, (-i) % n_x, (-j) % n_x] = np.conj(smp.value)
    phase = _phase(q)
    q_cone = np.fft.ifftn(spec * phase).real
    ref = np.fft.fftn(q.q)
    q_cone_ref = np.fft.ifftn(np.where(mask, ref, 0.0)).real
    return ConeRecovery(q_cone, q_cone_ref, mask, samples, spec)


def save_field(path, field: np.ndarray) -> None:
    io.write_grid(path, field)


def bump_phantom(center=(1.0, 0.0, 0.0), radius: float = 0.6) -> Callable:
    """Isotropic C-infinity space-time bump."""
    from .wave1d import _std_bump

    def fn(t, x, y):
        rho = np.sqrt((t - center[0]) ** 2 + (x - center[1]) ** 2 + (y - center[2]) ** 2) / radius
        return _std_bump(rho)

    return fn


def static_phantom(width: float = 0.5, t_lo: float = 0.2, t_hi: float = 1.8, ramp: float = 0.3) -> Callable:
    """``g(x) * plateau(t)``: a spatial bump held on for most of the time window."""
    from .wave1d import _std_bump

    def plateau(t):
        up = _smoothstep((t - t_lo) / ramp)
        down = _smoothstep((t_hi - t) / ramp)
        return up * down

    def fn(t, x, y):
        return plateau(t) * _std_bump(np.hypot(x, y) / width)

    return fn


def _smoothstep(z):
    """C-infinity step from 0 (z <= 0) to 1 (z >= 1)."""
    z = np.asarray(z, float)
    a = np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
    b = np.where(z < 1, np.exp(-1.0 / np.where(z < 1, 1.0 - z, 1.0)), 0.0)
    return a / (a + b)
