"""Interior inner products from boundary data alone.

``W_{f,h}(t, s) = (u^f(t), u^h(s))_{L^2(0,1)}`` solves
``(d_t^2 - d_s^2) W = f(t) (Lambda h)(s) - (Lambda f)(t) h(s)`` with zero
Cauchy data at ``t = 0``, so it can be computed from the Dirichlet-to-Neumann
map. This module assembles a discrete DtN matrix and evaluates ``W`` either on
the whole (t, s) plane (leapfrog) or directly on the diagonal (Duhamel).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import toeplitz

from . import io
from .wave1d import SourceSignal, SpatialGrid, TimeGrid, dtn_trace, solve_forward

SourceLike = SourceSignal | np.ndarray


@dataclass
class DtnMatrix:
    """Causal matrix ``Lambda[k, j]`` taking source samples to flux samples.

    ``basis`` records how the columns were produced (grid sizes, potential
    description, assembly method) and is written to the CSV sidecar.
    """

    entries: np.ndarray
    tgrid: TimeGrid
    basis: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.tgrid.n_t
        if self.entries.shape != (n, n):
            raise ValueError(f"DtN matrix must be {n}x{n}, got {self.entries.shape}")

    def apply(self, samples: np.ndarray) -> np.ndarray:
        """``Lambda`` applied to samples of shape ``(n_t,)`` or ``(n_t, m)``."""
        samples = np.asarray(samples, float)
        if samples.shape[0] != self.tgrid.n_t:
            raise ValueError("sample length does not match the DtN time grid")
        return self.entries @ samples

    def respond(self, sources: Sequence[SourceLike], tg: TimeGrid | None = None):
        """Source samples and their fluxes on the working grid ``tg``.

        Analytic sources are sampled on the matrix grid, mapped through
        ``Lambda`` and transferred to ``tg`` (subsampling when ``tg`` is an
        integer coarsening, cubic interpolation otherwise). Raw sample arrays
        must already live on the matrix grid.

        Returns two arrays of shape ``(tg.n_t, len(sources))``.
        """
        tg = tg or self.tgrid
        own = np.column_stack([_sample(s, self.tgrid) for s in sources])
        flux = self.apply(own)
        if tg == self.tgrid:
            return own, flux
        if tg.t_max > self.tgrid.t_max + 1e-9:
            raise ValueError("working grid extends beyond the DtN data horizon")
        ratio = tg.dt / self.tgrid.dt
        step = int(round(ratio))
        if abs(ratio - step) < 1e-9:
            idx = np.arange(tg.n_t) * step
            samples = np.column_stack([_sample(s, tg) if isinstance(s, SourceSignal) else s[idx]
                                       for s in sources])
            return samples, flux[idx]
        spline = CubicSpline(self.tgrid.t, flux, axis=0)
        vals = np.column_stack([_sample(s, tg) if isinstance(s, SourceSignal) else
                                np.interp(tg.t, self.tgrid.t, s) for s in sources])
        return vals, spline(tg.t)

    def causality_defect(self) -> float:
        """Largest entry above the diagonal relative to the largest entry."""
        upper = np.triu(self.entries, 1)
        return float(np.abs(upper).max() / np.abs(self.entries).max())

    def save(self, path: str | Path) -> None:
        """BCW1 grid file plus a ``.csv`` sidecar with the basis parameters."""
        path = Path(path)
        io.write_grid(path, self.entries)
        meta = dict(self.basis, n_t=self.tgrid.n_t, dt=self.tgrid.dt)
        io.write_csv(path.with_suffix(".csv"), ("key", "value"),
                     [(k, json.dumps(v)) for k, v in sorted(meta.items())])

    @classmethod
    def load(cls, path: str | Path) -> "DtnMatrix":
        path = Path(path)
        entries = io.read_grid(path)
        _, rows = io.read_csv(path.with_suffix(".csv"))
        meta = {k: json.loads(v) for k, v in rows}
        tg = TimeGrid(int(meta.pop("n_t")), float(meta.pop("dt")))
        return cls(entries, tg, meta)


def _sample(s: SourceLike, tg: TimeGrid) -> np.ndarray:
    if isinstance(s, SourceSignal):
        return s.sample(tg)
    arr = np.asarray(s, float)
    if arr.shape != (tg.n_t,):
        raise ValueError(f"sample array has shape {arr.shape}, expected ({tg.n_t},)")
    return arr


def assemble_dtn(
    q,
    c,
    sg: SpatialGrid,
    tg: TimeGrid,
    method: str = "impulse",
    workers: int = 1,
    label: str = "",
) -> DtnMatrix:
    """Discrete DtN map of the leapfrog solver on ``(sg, tg)``.

    Columns are responses to unit impulses ``e_j``, which is exact for the
    discrete (linear) solver. The coefficients do not depend on time and the
    Taylor start leaves the interior untouched at the first step, so every
    column ``j >= 1`` is a shift of the first: ``method="impulse"`` runs one
    solve and builds the Toeplitz matrix; ``method="columns"`` runs ``n_t - 1``
    independent solves (embarrassingly parallel, ``O(n_t^2 n_x)``) and is kept
    as a cross-check. Column 0 never matters because sources vanish at t=0.
    """
    n = tg.n_t
    basis = {"method": method, "n_x": sg.n_x, "label": label, "basis": "unit-impulse"}
    if method == "impulse":
        longer = TimeGrid(n + 1, tg.dt)
        imp = np.zeros(n + 1)
        imp[1] = 1.0
        g = dtn_trace(solve_forward(q, c, imp, sg, longer)).samples
        col = g[1:]
        row = np.zeros(n)
        row[0] = col[0]
        return DtnMatrix(toeplitz(col, row), tg, basis)
    if method != "columns":
        raise ValueError(f"unknown assembly method {method!r}")

    def column(j: int) -> np.ndarray:
        imp = np.zeros(n)
        imp[j] = 1.0
        return dtn_trace(solve_forward(q, c, imp, sg, tg)).samples

    entries = np.zeros((n, n))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for j, colj in zip(range(1, n), pool.map(column, range(1, n))):
            entries[:, j] = colj
    entries[:, 0] = np.concatenate((entries[1:, 1], [0.0]))
    return DtnMatrix(entries, tg, basis)


# ---------------------------------------------------------------------------
# Connecting kernel on the (t, s) plane


@dataclass
class ConnectingKernel:
    """Samples ``W[k, j] = W_{f,h}(t_k, s_j)`` on ``tgrid`` x ``tgrid``."""

    W: np.ndarray
    tgrid: TimeGrid
    pair: tuple = ()


def blagoveshchenskii(f: SourceLike, h: SourceLike, dtn: DtnMatrix) -> ConnectingKernel:
    """Solve for ``W_{f,h}`` from the DtN matrix.

    The source ``F(t, s) = f(t) Lambda h(s) - Lambda f(t) h(s)`` is marched in
    ``t`` with the leapfrog stencil at unit Courant number on
    ``s in [0, S_max]`` where ``S_max`` is the DtN horizon. ``W(t, 0) = 0`` is
    imposed (equivalently ``F`` and ``W`` are odd in ``s``). The far edge
    cannot reach points with ``t + s < S_max``, so the returned kernel covers
    ``t, s in [0, S_max / 2]``.
    """
    tg = dtn.tgrid
    fs, hs = _sample(f, tg), _sample(h, tg)
    lf, lh = dtn.apply(fs), dtn.apply(hs)
    n = tg.n_t
    n_w = (n - 1) // 2 + 1
    dt2 = tg.dt**2
    F = np.outer(fs[:n_w], lh) - np.outer(lf[:n_w], hs)
    W = np.zeros((n_w, n))
    if n_w > 1:
        W[1, 1:-1] = 0.5 * dt2 * F[0, 1:-1]
    for k in range(1, n_w - 1):
        W[k + 1, 1:-1] = W[k, 2:] + W[k, :-2] - W[k - 1, 1:-1] + dt2 * F[k, 1:-1]
    return ConnectingKernel(W[:, :n_w].copy(), TimeGrid(n_w, tg.dt), (f, h))


def diagonal(kernel: ConnectingKernel) -> np.ndarray:
    """The trace ``W(t_k, t_k)``."""
    return np.diagonal(kernel.W).copy()


# ---------------------------------------------------------------------------
# Diagonal values directly (Duhamel)


def _window_integrals(g: np.ndarray, K: int, dt: float) -> np.ndarray:
    """``int_{t_k}^{2T - t_k} g`` for ``k = 0..K`` (trapezoid), ``T = t_K``."""
    cum = np.zeros((2 * K + 1,) + g.shape[1:])
    cum[1:] = np.cumsum(0.5 * dt * (g[1 : 2 * K + 1] + g[: 2 * K]), axis=0)
    k = np.arange(K + 1)
    return cum[2 * K - k] - cum[k]


def diagonal_inner_products(
    T: float,
    tg: TimeGrid,
    f: np.ndarray,
    lf: np.ndarray,
    h: np.ndarray,
    lh: np.ndarray,
) -> np.ndarray:
    """Matrix of ``W_{f_a, h_b}(T, T)`` from sample/flux pairs.

    Evaluates the Duhamel solution at ``(T, T)``: the backward characteristic
    cone of that point meets ``{t = t'}`` in ``s in [t', 2T - t']``, which
    never touches ``s = 0``, so

    ``W(T,T) = 1/2 int_0^T [f(t') int_{t'}^{2T-t'} Lambda h - Lambda f(t') int_{t'}^{2T-t'} h] dt'``.

    Inputs have shape ``(n_t, m)`` with ``n_t >= 2 K + 1``, ``T = t_K``.
    """
    K = tg.index(T)
    f, lf, h, lh = (np.asarray(a, float) for a in (f, lf, h, lh))
    f, lf, h, lh = (a[:, None] if a.ndim == 1 else a for a in (f, lf, h, lh))
    if min(a.shape[0] for a in (f, lf, h, lh)) < 2 * K + 1:
        raise ValueError(f"need samples up to 2T = {2 * T}")
    w = np.full(K + 1, tg.dt)
    w[0] = w[-1] = 0.5 * tg.dt
    ph = _window_integrals(h, K, tg.dt)
    plh = _window_integrals(lh, K, tg.dt)
    return 0.5 * (f[: K + 1].T @ (w[:, None] * plh) - lf[: K + 1].T @ (w[:, None] * ph))
