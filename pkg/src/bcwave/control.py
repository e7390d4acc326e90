"""Regularized approximate boundary control.

Given boundary data only, find a source supported in ``(T - s, T)`` whose
wave at time ``T`` best approximates ``u^f(T)``. By finite speed the
controlled wave lives in ``(0, s)``, so the optimum is the truncation
``1_(0,s) u^f(T)`` and the residual is the energy of ``u^f(T)`` on ``(s, 1)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

from .connecting import DtnMatrix, diagonal_inner_products
from .wave1d import SourceSignal, TimeGrid

log = logging.getLogger(__name__)

DEFAULT_ALPHA_SWEEP = tuple(10.0 ** -np.arange(2, 8.5, 0.5))
EPS_QUAD = 1e-8


class ControlError(RuntimeError):
    """The Gram system is not a valid symmetric positive semidefinite form."""


@dataclass(frozen=True)
class ControlBasis:
    """Cubic B-splines on a uniform partition of ``(T - s, T)``.

    With ``clamped=True`` (default) the left end knot is repeated four
    times, so the first elements do not vanish at ``T - s`` and the control
    can switch on sharply there. Plain uniform bumps all start with a cubic
    ramp, which costs about one knot spacing of reach. The right end stays
    unclamped: the diagonal formula also samples sources after ``T`` and a
    jump back to zero there spoils it.
    """

    elements: tuple[SourceSignal, ...]
    window: tuple[float, float]

    @property
    def M(self) -> int:
        return len(self.elements)

    @classmethod
    def uniform(cls, T: float, s: float, M: int, clamped: bool = True) -> "ControlBasis":
        if not 0 < s < T or M < 4:
            raise ValueError(f"need 0 < s < T and M >= 4 (s={s}, T={T}, M={M})")
        lo = T - s
        if clamped:
            knots = np.concatenate(([lo] * 3, lo + s * np.arange(M + 1) / M))
        else:
            knots = lo + s / (M + 3) * np.arange(M + 4)
        knots[-1] = T
        elements = tuple(SourceSignal.make_bspline(knots[m : m + 5]) for m in range(M))
        return cls(elements, (lo, T))


@dataclass
class ControlSolution:
    """Coefficients of the control and the achieved squared distance."""

    coefficients: np.ndarray
    residual: float
    alpha: float
    target_norm2: float = 0.0
    flagged: bool = False
    lcurve: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None


def gram_system(
    f: SourceSignal | np.ndarray,
    T: float,
    dtn: DtnMatrix,
    basis: ControlBasis,
    tg: TimeGrid | None = None,
    extra: tuple = (),
):
    """Gram matrix ``K``, cross vectors ``b`` and ``W_ff`` at ``(T, T)``.

    Columns of ``b`` are ordered ``f`` then ``extra``; the third return value
    holds ``W_{g,g'}(T,T)`` among them. The discrete diagonal form is
    symmetric up to rounding, which :func:`check_gram` relies on.
    """
    tg = tg or dtn.tgrid
    sources = list(basis.elements) + [f] + list(extra)
    g, lg = dtn.respond(sources, tg)
    full = diagonal_inner_products(T, tg, g, lg, g, lg)
    M = basis.M
    return full[:M, :M], full[:M, M:], full[M:, M:]


def _solve(K: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    A = K + alpha * np.eye(K.shape[0])
    try:
        return cho_solve(cho_factor(A), b)
    except LinAlgError:
        w, V = eigh(A)
        w = np.where(w > 1e-14 * np.abs(w).max(), w, np.inf)
        return V @ ((V.T @ b) / w[:, None] if b.ndim == 2 else (V.T @ b) / w)


def check_gram(K: np.ndarray, tol: float = 1e-8) -> None:
    scale = np.abs(K).max()
    if not np.all(np.isfinite(K)):
        raise ControlError("Gram matrix has non-finite entries")
    if scale > 0 and np.abs(K - K.T).max() > tol * scale:
        raise ControlError(f"Gram matrix asymmetry {np.abs(K - K.T).max() / scale:.3g} exceeds {tol:g}")


def lcurve_alpha(K: np.ndarray, b: np.ndarray, wff: float, sweep=DEFAULT_ALPHA_SWEEP):
    """Pick ``alpha`` at the maximum-curvature corner of the L-curve.

    The curve is ``(log residual, log ||c||)`` over the geometric sweep
    ``sweep * trace(K) / M``.
    """
    scale = np.trace(K) / K.shape[0]
    alphas = np.asarray(sweep, float) * scale
    res, nrm = np.empty(len(alphas)), np.empty(len(alphas))
    for i, a in enumerate(alphas):
        c = _solve(K, b, a)
        res[i] = c @ K @ c - 2 * c @ b + wff
        nrm[i] = np.linalg.norm(c)
    floor = 1e-30 + 1e-14 * max(abs(wff), 1e-300)
    x = np.log(np.maximum(res, floor))
    y = np.log(np.maximum(nrm, 1e-300))
    p = np.log(alphas)
    if len(alphas) < 3:
        return alphas[-1], (alphas, res, nrm)
    dx, dy = np.gradient(x, p), np.gradient(y, p)
    ddx, ddy = np.gradient(dx, p), np.gradient(dy, p)
    kappa = (dx * ddy - dy * ddx) / np.maximum((dx**2 + dy**2) ** 1.5, 1e-300)
    i = int(np.argmax(np.abs(kappa[1:-1]))) + 1
    return float(alphas[i]), (alphas, res, nrm)


def project(
    f: SourceSignal | np.ndarray,
    s: float,
    T: float,
    dtn: DtnMatrix,
    basis: ControlBasis | None = None,
    alpha: float | None = None,
    tg: TimeGrid | None = None,
    M: int = 64,
) -> ControlSolution:
    """Regularized best approximation of ``u^f(T)`` by controls on ``(T-s, T)``.

    Solves ``(K + alpha I) c = b`` with ``K_mm' = W_{f_m, f_m'}(T,T)`` and
    ``b_m = W_{f_m, f}(T,T)``; the residual is ``c'Kc - 2c'b + W_ff(T,T)``.
    ``alpha=None`` selects the regularization by the L-curve rule.
    """
    if not 0 < s < T:
        raise ValueError(f"need 0 < s < T, got s={s}, T={T}")
    if alpha is not None and alpha < 0:
        raise ValueError("alpha must be nonnegative")
    basis = basis or ControlBasis.uniform(T, s, M)
    K, b, wff = gram_system(f, T, dtn, basis, tg)
    check_gram(K)
    b = b[:, 0]
    wff = float(wff[0, 0])
    curve = None
    if alpha is None:
        alpha, curve = lcurve_alpha(K, b, wff)
    c = _solve(K, b, alpha)
    residual = float(c @ K @ c - 2 * c @ b + wff)
    eps = EPS_QUAD * max(abs(wff), np.abs(K).max())
    flagged = residual < -eps
    if flagged:
        log.warning("negative control residual %.3g at s=%g, T=%g", residual, s, T)
    return ControlSolution(c, residual, float(alpha), wff, flagged, curve)


def truncated_inner_product(
    f: SourceSignal | np.ndarray,
    h: SourceSignal | np.ndarray,
    s: float,
    T: float,
    dtn: DtnMatrix,
    basis: ControlBasis | None = None,
    alpha: float | None = None,
    tg: TimeGrid | None = None,
    M: int = 64,
) -> float:
    """Boundary-data value of ``(1_(0,s) u^f(T), u^h(T))``: ``sum_m c_m W_{f_m,h}(T,T)``."""
    basis = basis or ControlBasis.uniform(T, s, M)
    sol = project(f, s, T, dtn, basis, alpha, tg)
    _, b, _ = gram_system(h, T, dtn, basis, tg)
    return float(sol.coefficients @ b[:, 0])


def min_gram_eigenvalue(K: np.ndarray) -> float:
    """Smallest eigenvalue of ``K`` relative to ``||K||_2``."""
    w = np.linalg.eigvalsh(K)
    return float(w[0] / max(abs(w[-1]), 1e-300))
