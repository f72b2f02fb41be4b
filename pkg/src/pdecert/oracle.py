"""Independent ground truth: delay-system spectra and exact transport solutions.

The rightmost characteristic roots of dx = A x(t) + B x(t - h) are computed
by Chebyshev collocation of the solution segment on [-h, 0], the standard
spectrally accurate discretization of the delay semigroup generator.  The
transport-equation helpers provide the exact method-of-characteristics
solution used to validate the projection filter and the IQC lemmas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import legendre

__all__ = [
    "DdeSpectrum",
    "OracleConvergenceError",
    "dde_abscissa",
    "stable_intervals",
    "STABILITY_CUTOFF",
    "transport_state",
    "transport_trace",
    "transport_projections",
]

# strict stability convention: abscissa below this counts as stable
STABILITY_CUTOFF = -1e-8

_CONVERGENCE_TOL = 1e-6
_ORDER_LADDER = tuple(range(20, 81, 10))


class OracleConvergenceError(RuntimeError):
    """Raised when the collocation abscissa fails to settle across orders."""


@dataclass(frozen=True, eq=False)
class DdeSpectrum:
    """Computed characteristic roots at one collocation order."""

    abscissa: float
    roots: np.ndarray
    order: int


def _cheb_diff(M: int) -> Tuple[np.ndarray, np.ndarray]:
    """Chebyshev points on [1, -1] and the differentiation matrix."""
    if M == 0:
        return np.array([1.0]), np.zeros((1, 1))
    k = np.arange(M + 1)
    x = np.cos(np.pi * k / M)
    c = np.hstack([2.0, np.ones(M - 1), 2.0]) * (-1.0) ** k
    X = np.tile(x, (M + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(M + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _collocation_roots(A: np.ndarray, B: np.ndarray, h: float, M: int) -> np.ndarray:
    n = A.shape[0]
    _, D = _cheb_diff(M)
    # segment nodes theta_j = h (x_j - 1) / 2 run from 0 down to -h
    gen = np.kron((2.0 / h) * D, np.eye(n))
    gen[:n, :] = 0.0
    gen[:n, :n] = A
    gen[:n, -n:] = gen[:n, -n:] + B
    return np.linalg.eigvals(gen)


def dde_abscissa(A, B, h: float, order: int | None = None) -> DdeSpectrum:
    """Rightmost characteristic roots of dx = A x + B x(t - h).

    With ``order`` given, a single collocation of that order is used.
    Otherwise the order is raised in steps of 10 until the abscissa moves
    by less than 1e-6, and failure to settle by order 80 is an error.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if h <= 0:
        raise ValueError("delay must be positive")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square and of equal size")
    if order is not None:
        if order < 10:
            raise ValueError("collocation order must be at least 10")
        roots = _collocation_roots(A, B, h, order)
        return DdeSpectrum(float(roots.real.max()), roots, order)

    prev = None
    for M in _ORDER_LADDER:
        roots = _collocation_roots(A, B, h, M)
        absc = float(roots.real.max())
        if prev is not None and abs(absc - prev) < _CONVERGENCE_TOL:
            return DdeSpectrum(absc, roots, M)
        prev = absc
    raise OracleConvergenceError(
        f"abscissa did not converge for h={h} across collocation orders "
        f"{_ORDER_LADDER[0]}..{_ORDER_LADDER[-1]}"
    )


def stable_intervals(
    A,
    B,
    h_grid: Sequence[float],
    refine_tol: float = 1e-4,
    abscissas: Sequence[float] | None = None,
) -> List[Tuple[float, float]]:
    """Maximal delay sub-intervals of the grid with a strictly stable spectrum.

    Grid endpoints of each run are refined by bisection against the
    neighbouring unstable points down to ``refine_tol``.  Precomputed
    ``abscissas`` for the grid points may be passed to skip recomputation.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.ndim != 1 or h_grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array")
    if np.any(np.diff(h_grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    def stable(h: float) -> bool:
        return dde_abscissa(A, B, h).abscissa < STABILITY_CUTOFF

    if abscissas is None:
        flags = np.array([stable(h) for h in h_grid])
    else:
        abscissas = np.asarray(abscissas, dtype=float)
        if abscissas.shape != h_grid.shape:
            raise ValueError("abscissas must match the grid")
        flags = abscissas < STABILITY_CUTOFF

    def bisect(h_stab: float, h_unst: float) -> float:
        lo, hi = (h_stab, h_unst) if h_stab < h_unst else (h_unst, h_stab)
        lo_stable = h_stab < h_unst
        while hi - lo > refine_tol:
            mid = 0.5 * (lo + hi)
            if stable(mid) == lo_stable:
                lo = mid
            else:
                hi = mid
        # return the certified-stable side of the bracket
        return lo if lo_stable else hi

    intervals: List[Tuple[float, float]] = []
    i = 0
    npts = h_grid.size
    while i < npts:
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < npts and flags[j + 1]:
            j += 1
        lo = h_grid[i] if i == 0 else bisect(h_grid[i], h_grid[i - 1])
        hi = h_grid[j] if j == npts - 1 else bisect(h_grid[j], h_grid[j + 1])
        intervals.append((float(lo), float(hi)))
        i = j + 1
    return intervals


# --- exact transport solution -----------------------------------------------
#
# For z_t = -rho z_x on [0, 1] with z(., 0) = 0 and z(0, t) = y(t), the
# method of characteristics gives z(x, t) = y(t - x / rho) for t >= x / rho
# and zero ahead of the wavefront.


def _sample(y: Callable[[np.ndarray], np.ndarray], t: np.ndarray) -> np.ndarray:
    vals = np.asarray(y(t), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals


def transport_state(
    y: Callable[[np.ndarray], np.ndarray], speed: float, x, t
) -> np.ndarray:
    """Exact transport solution z(x, t) for the boundary input y."""
    if speed <= 0:
        raise ValueError("speed must be positive")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shifted = t - x / speed
    vals = _sample(y, np.maximum(shifted.ravel(), 0.0))
    vals[shifted.ravel() < 0.0] = 0.0
    return vals.reshape(shifted.shape + (vals.shape[-1],))


def transport_trace(
    y: Callable[[np.ndarray], np.ndarray], speed: float
) -> Callable[[np.ndarray], np.ndarray]:
    """Boundary-trace signal t -> [z(0, t), z(1, t)] of the exact solution."""

    def trace(t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        at_in = _sample(y, t)
        shifted = t - 1.0 / speed
        at_out = _sample(y, np.maximum(shifted, 0.0))
        at_out[shifted < 0.0] = 0.0
        return np.hstack([at_in, at_out])

    return trace


def transport_projections(
    y: Callable[[np.ndarray], np.ndarray],
    speed: float,
    times: Sequence[float],
    order: int,
    nodes: int = 64,
) -> np.ndarray:
    """Legendre projection coefficients of the exact transport solution.

    Integrates y(t - x / speed) L_k(x) over [0, min(1, speed * t)] by Gauss
    quadrature (the integrand vanishes ahead of the wavefront, so splitting
    there keeps the rule at full accuracy).  Rows follow the filter state
    layout: coefficient order is the outer index, channel the inner one.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    xg, wg = legendre.gauss_rule(nodes)
    width = _sample(y, np.zeros(1)).shape[1]
    out = np.zeros((times.size, (order + 1) * width))
    for ti, t in enumerate(times):
        b = min(1.0, speed * t)
        if b <= 0.0:
            continue
        xs = b * xg
        basis = legendre.value_stack(order, xs)  # (order+1, nodes)
        zs = _sample(y, t - xs / speed)  # (nodes, width)
        out[ti] = (b * np.einsum("g,kg,gc->kc", wg, basis, zs)).reshape(-1)
    return out
