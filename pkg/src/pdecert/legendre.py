"""Shifted Legendre polynomials on [0, 1].

Provides point evaluation through the explicit binomial-coefficient sum,
the derivative-coupling coefficients that make d/dx map the family into
itself, and the block coupling matrix used by the projection filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "value",
    "value_stack",
    "ell",
    "ell_matrix",
    "deriv_matrix",
    "norm_sq",
    "LegendreTable",
    "gauss_rule",
]

_MAX_ORDER = 20  # integer binomials stay exact and well-scaled up to here


def _coefficients(k: int) -> np.ndarray:
    # L_k(x) = (-1)^k sum_l (-1)^l C(k,l) C(k+l,l) x^l, exact in ints
    sign = (-1) ** k
    return np.array(
        [sign * (-1) ** l * math.comb(k, l) * math.comb(k + l, l) for l in range(k + 1)],
        dtype=float,
    )


def value(k: int, x):
    """Evaluate the k-th shifted Legendre polynomial at x in [0, 1]."""
    if k < 0:
        raise ValueError("order must be nonnegative")
    if k > _MAX_ORDER:
        raise ValueError(f"order {k} exceeds supported maximum {_MAX_ORDER}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise ValueError("argument outside [0, 1]")
    coeffs = _coefficients(k)
    out = np.full_like(x_arr, coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * x_arr + c
    return float(out) if np.isscalar(x) else out


def value_stack(order: int, x: np.ndarray) -> np.ndarray:
    """Values of L_0..L_order at the points x, shape (order+1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([value(k, x) for k in range(order + 1)])


def ell(k: int, j: int) -> float:
    """Derivative-coupling coefficient: d/dx L_k = sum_j ell(k,j) L_j."""
    if k < 0 or j < 0:
        raise ValueError("orders must be nonnegative")
    if j > k:
        return 0.0
    return float((2 * j + 1) * (1 - (-1) ** (k + j)))


def ell_matrix(order: int) -> np.ndarray:
    """The (order+1) x (order+1) matrix of coupling coefficients."""
    return np.array([[ell(k, j) for j in range(order + 1)] for k in range(order + 1)])


def deriv_matrix(order: int, width: int) -> np.ndarray:
    """Block coupling matrix with (i, j) block ell(i, j) * I_width."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if width < 1:
        raise ValueError("width must be at least 1")
    return np.kron(ell_matrix(order), np.eye(width))


def norm_sq(k: int) -> float:
    """Squared L2(0,1) norm of the k-th polynomial, 1 / (2k + 1)."""
    if k < 0:
        raise ValueError("order must be nonnegative")
    return 1.0 / (2 * k + 1)


@dataclass(frozen=True, eq=False)
class LegendreTable:
    """Coupling coefficients and norms up to a fixed order."""

    order: int
    ell: np.ndarray
    norms: np.ndarray

    @classmethod
    def build(cls, order: int) -> "LegendreTable":
        if order < 0:
            raise ValueError("order must be nonnegative")
        norms = np.array([norm_sq(k) for k in range(order + 1)])
        table = cls(order=order, ell=ell_matrix(order), norms=norms)
        table.ell.setflags(write=False)
        table.norms.setflags(write=False)
        return table


def gauss_rule(n: int = 64):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0
