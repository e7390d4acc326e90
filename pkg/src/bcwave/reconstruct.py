"""Potential reconstruction from the DtN map alone.

Pipeline: truncated inner products ``G_jk(s) = (1_(0,s) u^{h_j}(T), u^{h_k}(T))``
from the control solver, ``B_jk = dG/ds = u^{h_j}(T,s) u^{h_k}(T,s)``,
a rank-one factorization of each ``J x J`` slice into wave values up to a
sign, and finally ``q = (D_x^2 v - D_T^2 v) / v`` averaged over sources and
observation times.

Nothing here reads an interior field; the interface audit in the test
suite checks that this module only imports boundary-data machinery.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

from . import io
from .connecting import DtnMatrix
from .control import (
    DEFAULT_ALPHA_SWEEP,
    ControlBasis,
    ControlError,
    _solve,
    check_gram,
    gram_system,
    lcurve_alpha,
)
from .wave1d import SourceSignal, TimeGrid, time_step_for

log = logging.getLogger(__name__)

RANK_TOL = 0.05
AMP_TOL = 0.05
DEFAULT_T_GRID = tuple(np.round(np.arange(1.1, 1.5001, 0.05), 10))


def default_sources(J: int = 6, width: float = 0.6, lo: float = 0.02, hi: float = 1.12) -> list[SourceSignal]:
    """``J`` smooth bumps of equal width whose left edges are spread over ``(lo, hi - width)``.

    Wide sources keep the waves smooth on the scale of the T-grid spacing.
    """
    starts = np.linspace(lo, hi - width, J)
    return [SourceSignal.make_bump(a, a + width) for a in starts]


def default_s_grid(ds: float = 0.0125) -> np.ndarray:
    """Uniform points ``k * ds`` in (0, 1).

    ``ds`` should be a whole number of time steps (see
    :func:`working_time_grid`): the control window starts at ``T - s`` and
    when that is not a time level the switch-on is sampled up to half a step
    late, which shows up as an even/odd ripple in ``G(s)``.
    """
    n = int(round(1.0 / ds))
    return np.arange(1, n) * (1.0 / n)


def working_time_grid(dx: float, t_max: float = 3.0, ds: float = 0.0125, cfl: float = 0.95) -> TimeGrid:
    """Time grid whose step divides ``ds`` (and therefore the T spacing)."""
    return TimeGrid.covering(t_max, time_step_for(dx, cfl, align=ds))


def knots_for(s: float, knot_spacing: float, lo: int = 4, hi: int = 64) -> int:
    """Number of control elements giving roughly ``knot_spacing`` on ``(T-s, T)``."""
    return int(np.clip(round(s / knot_spacing), lo, hi))


@dataclass
class ProductTensor:
    """``B[j, k, i, n] ~ u^{h_j}(T_n, x_i) u^{h_k}(T_n, x_i)``.

    ``G`` holds the truncated inner products before differentiation and
    ``flagged`` marks ``(i, n)`` where a control solve was rejected or the
    s-derivative is one-sided.
    """

    B: np.ndarray
    x: np.ndarray
    T: np.ndarray
    G: np.ndarray
    flagged: np.ndarray
    sources: tuple = ()

    @property
    def J(self) -> int:
        return self.B.shape[0]


@dataclass
class RecoveredField:
    v: np.ndarray  # J x n_x x n_T
    mask: np.ndarray  # n_x x n_T
    ratio: np.ndarray  # second / first eigenvalue
    x: np.ndarray
    T: np.ndarray


@dataclass
class ReconstructionResult:
    x: np.ndarray
    q_est: np.ndarray
    weight: np.ndarray
    mask: np.ndarray
    residuals: np.ndarray
    q_true: np.ndarray | None = None
    ratio_stats: dict = field(default_factory=dict)

    def metrics(self, window: tuple[float, float] = (0.1, 0.9)) -> dict:
        inside = (self.x > window[0]) & (self.x < window[1])
        m = self.mask & inside
        out = {
            "coverage": float(m.sum() / max(inside.sum(), 1)),
            "max_abs_q_est": float(np.abs(self.q_est[m]).max()) if m.any() else float("nan"),
            "n_masked": int(m.sum()),
            **self.ratio_stats,
        }
        if self.q_true is not None and m.any():
            ref = np.linalg.norm(self.q_true[m])
            diff = np.linalg.norm(self.q_est[m] - self.q_true[m])
            out["l2_error"] = float(diff / ref) if ref > 0 else float(diff)
            out["l2_abs_error"] = float(diff * np.sqrt(self.x[1] - self.x[0]))
        return out

    def export(self, csv_path: str | Path, json_path: str | Path | None = None) -> None:
        header = ["x"] + (["q_true"] if self.q_true is not None else []) + ["q_est", "weight", "mask"]
        rows = []
        for i, x in enumerate(self.x):
            row = [x] + ([self.q_true[i]] if self.q_true is not None else [])
            rows.append(row + [self.q_est[i], self.weight[i], bool(self.mask[i])])
        io.write_csv(csv_path, header, rows)
        if json_path is not None:
            Path(json_path).write_text(json.dumps(self.metrics(), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Products


def central_derivative(y: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order centred first derivative (second order in the end cells).

    The second-order stencil leaves an ``h^2 y'''/6`` error of several
    percent in the products, which the ``1/v`` of the potential step then
    amplifies.
    """
    y = np.moveaxis(y, axis, 0)
    d = np.gradient(y, h, axis=0, edge_order=2)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def _truncated_products(h_list, T, s, dtn, tg, M, alpha, sweep):
    """``G_jk = sum_m c^{(j)}_m W_{f_m, h_k}(T,T)`` for one ``(T, s)``."""
    basis = ControlBasis.uniform(T, s, M)
    K, b, W = gram_system(h_list[0], T, dtn, basis, tg, extra=tuple(h_list[1:]))
    check_gram(K)
    if alpha is None:
        alpha = np.median([lcurve_alpha(K, b[:, j], W[j, j], sweep)[0] for j in range(b.shape[1])])
    G = _solve(K, b, alpha).T @ b
    return 0.5 * (G + G.T)


def product_profile(
    h_list: Sequence[SourceSignal],
    T_grid: Sequence[float],
    s_grid: np.ndarray,
    dtn: DtnMatrix,
    *,
    M: int | None = None,
    knot_spacing: float = 0.01,
    alpha: float | None = None,
    tg: TimeGrid | None = None,
    workers: int = 1,
    sweep=DEFAULT_ALPHA_SWEEP,
    smooth: bool = True,
) -> ProductTensor:
    """Pointwise products of interior waves from boundary data.

    ``M=None`` scales the number of control elements with ``s`` so the knot
    spacing stays near ``knot_spacing`` (capped at 64); a fixed ``M`` uses
    the same count for every ``s``. ``G(s)`` is smoothed by a 5-point local
    quadratic fit (with the exact value ``G(0) = 0`` prepended) and then
    differenced centrally.
    """
    tg = tg or dtn.tgrid
    T_grid = np.asarray(T_grid, float)
    s_grid = np.asarray(s_grid, float)
    ds = np.diff(s_grid)
    if len(s_grid) < 5 or np.ptp(ds) > 1e-9 * ds.mean():
        raise ValueError("s_grid must be uniform with at least 5 points")
    off = np.abs(s_grid / tg.dt - np.round(s_grid / tg.dt)).max()
    if off > 1e-6:
        log.warning("s_grid is not on the time grid (off by %.2f steps); expect ripple in B", off)
    if T_grid.min() <= 1.0 or 2 * T_grid.max() > tg.t_max + 1e-9:
        raise ValueError("T_grid must lie in (1, t_max/2]")
    J, nS, nT = len(h_list), len(s_grid), len(T_grid)
    G = np.zeros((J, J, nS, nT))
    flagged = np.zeros((nS, nT), bool)

    def task(idx):
        i, n = idx
        s, T = s_grid[i], T_grid[n]
        Mi = M if M is not None else knots_for(s, knot_spacing)
        try:
            return idx, _truncated_products(h_list, T, s, dtn, tg, Mi, alpha, sweep)
        except (ControlError, np.linalg.LinAlgError) as exc:
            log.warning("control failed at s=%g, T=%g: %s", s, T, exc)
            return idx, None

    jobs = [(i, n) for n in range(nT) for i in range(nS)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for (i, n), g in pool.map(task, jobs):
            if g is None:
                flagged[i, n] = True
            else:
                G[:, :, i, n] = g

    # G(0) = 0 exactly; include it so the fit near the boundary is anchored
    full = np.concatenate((np.zeros((J, J, 1, nT)), G), axis=2)
    if smooth:
        full = savgol_filter(full, 5, 2, axis=2, mode="interp")
    B = central_derivative(full, ds.mean(), axis=2)[:, :, 1:]
    # the far end has only one-sided stencils and an extrapolated fit
    flagged[-2:] = True
    # A sampled switch-on at t_k acts like a jump at t_k - dt/2, so controls
    # on the window starting at T - s reach s + dt/2.
    return ProductTensor(B, s_grid + 0.5 * tg.dt, T_grid, G, flagged, tuple(h_list))


# ---------------------------------------------------------------------------
# Rank-one factorization


def factor_rank_one(pt: ProductTensor, rank_tol: float = RANK_TOL, floor: float = 1e-10) -> RecoveredField:
    """Leading eigenvector factorization ``B ~ v v^T`` with continuity signs.

    Per T level the seed is the ``x`` of largest leading eigenvalue; signs
    then propagate outwards so that each column has a nonnegative inner
    product with the last accepted neighbor. T levels are aligned to each
    other afterwards by the same rule applied to whole slices.
    """
    J, _, nX, nT = pt.B.shape
    S = 0.5 * (pt.B + pt.B.transpose(1, 0, 2, 3))
    slices = np.moveaxis(S, (0, 1), (2, 3))  # nX, nT, J, J
    w, e = np.linalg.eigh(slices)
    mu = np.maximum(w[..., -1], 0.0)
    second = np.abs(w[..., -2]) if J > 1 else np.zeros_like(mu)
    ratio = second / np.maximum(mu, 1e-300)
    v = np.sqrt(mu)[..., None] * e[..., -1]  # nX, nT, J
    noise = floor * max(mu.max(), 1e-300)
    mask = (mu > noise) & (ratio <= rank_tol) & ~pt.flagged

    for n in range(nT):
        seed = int(np.argmax(mu[:, n]))
        for order in (range(seed + 1, nX), range(seed - 1, -1, -1)):
            ref = v[seed, n].copy()
            for i in order:
                if v[i, n] @ ref < 0:
                    v[i, n] *= -1
                if mu[i, n] > noise:
                    ref = v[i, n].copy()
    for n in range(1, nT):
        if np.sum(v[:, n] * v[:, n - 1]) < 0:
            v[:, n] *= -1
    return RecoveredField(np.moveaxis(v, 2, 0), mask, ratio, pt.x, pt.T)


# ---------------------------------------------------------------------------
# Potential


def recover_potential(
    rf: RecoveredField,
    amp_tol: float = AMP_TOL,
    q_true: np.ndarray | None = None,
) -> ReconstructionResult:
    """``q = (D_x^2 v - D_T^2 v) / v`` with weights ``v^2``.

    Both second differences use the T-grid step: the x stencil strides over
    the evaluation grid by ``round(dT / dx)`` points. For free travelling
    waves ``F(t - x)`` the two stencils then agree exactly, so the
    truncation error left over is proportional to ``q`` itself.
    """
    v = rf.v
    J, nX, nT = v.shape
    dT = np.diff(rf.T)
    if nT < 5 or np.ptp(dT) > 1e-9 * dT.mean():
        raise ValueError("need at least 5 uniformly spaced T levels")
    dT = dT.mean()
    dx = rf.x[1] - rf.x[0]
    k = max(1, int(round(dT / dx)))
    h_x = k * dx
    vxx = np.full_like(v, np.nan)
    vxx[:, k:-k] = (v[:, 2 * k :] - 2 * v[:, k:-k] + v[:, : -2 * k]) / h_x**2
    vtt = np.full_like(v, np.nan)
    vtt[:, :, 1:-1] = (v[:, :, 2:] - 2 * v[:, :, 1:-1] + v[:, :, :-2]) / dT**2

    # every point of both stencils must be reliable and carry amplitude
    good = rf.mask[None] & (np.abs(v) > amp_tol * np.abs(v).max(axis=(1, 2), keepdims=True))
    adm = np.zeros_like(good)
    adm[:, k:-k, 1:-1] = (
        good[:, k:-k, 1:-1]
        & good[:, 2 * k :, 1:-1]
        & good[:, : -2 * k, 1:-1]
        & good[:, k:-k, 2:]
        & good[:, k:-k, :-2]
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        q_pt = np.where(adm, (vxx - vtt) / np.where(adm, v, 1.0), 0.0)
    wgt = np.where(adm, v**2, 0.0)
    wsum = wgt.sum(axis=(0, 2))
    mask = wsum > 0
    q_est = np.where(mask, (wgt * q_pt).sum(axis=(0, 2)) / np.where(mask, wsum, 1.0), np.nan)
    resid = np.where(adm, q_pt - q_est[None, :, None], np.nan)
    rm = rf.ratio[rf.mask]
    stats = {
        "ratio_median": float(np.median(rm)) if rm.size else float("nan"),
        "ratio_max": float(rm.max()) if rm.size else float("nan"),
    }
    return ReconstructionResult(rf.x, q_est, wsum, mask, resid, q_true, stats)


# ---------------------------------------------------------------------------
# End to end


def add_noise(dtn: DtnMatrix, level: float, seed: int) -> DtnMatrix:
    """Copy of ``dtn`` with i.i.d. Gaussian noise of relative size ``level``."""
    rng = np.random.default_rng(seed)
    scale = level * np.abs(dtn.entries).max()
    noisy = np.tril(dtn.entries + scale * rng.standard_normal(dtn.entries.shape))
    return DtnMatrix(noisy, dtn.tgrid, dict(dtn.basis, noise=level, seed=seed))


def reconstruct(
    dtn: DtnMatrix,
    *,
    sources: Sequence[SourceSignal] | None = None,
    T_grid: Sequence[float] = DEFAULT_T_GRID,
    s_grid: np.ndarray | None = None,
    tg: TimeGrid | None = None,
    M: int | None = None,
    knot_spacing: float = 0.01,
    alpha: float | None = None,
    workers: int = 1,
    q_true=None,
) -> tuple[ReconstructionResult, ProductTensor, RecoveredField]:
    """Run products, factorization and potential recovery.

    ``q_true`` is an optional callable (or array on the s-grid) used only to
    fill the comparison column of the result.
    """
    sources = list(sources) if sources is not None else default_sources()
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid)
    pt = product_profile(sources, T_grid, s_grid, dtn, M=M, knot_spacing=knot_spacing,
                         alpha=alpha, tg=tg, workers=workers)
    rf = factor_rank_one(pt)
    truth = None
    if q_true is not None:
        truth = np.asarray(q_true(pt.x) if callable(q_true) else q_true, float)
    return recover_potential(rf, q_true=truth), pt, rf
