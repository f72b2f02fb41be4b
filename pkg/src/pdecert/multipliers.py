"""IQC multiplier family for the transport-equation uncertainty.

Two finite-horizon IQCs are available for a transport channel of speed
rho, both derived from the Bessel inequality for Legendre projections:

* an energy-balance multiplier weighting the boundary values, paired with
  a negative-definite terminal cost on the projection coefficients, and
* an input-energy multiplier with zero terminal cost that trades the
  boundary input against the projected interior energy.

Both are affine in one symmetric decision variable each ("S" and "R"),
and their sum is again a valid multiplier for the same filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .linalg import block_diag, svec, svec_basis, svec_dim, symmetrize

__all__ = [
    "AffineSym",
    "MultiplierSet",
    "transport_energy_multiplier",
    "transport_input_multiplier",
    "transport_multipliers",
    "iqc_residual",
]


@dataclass(eq=False)
class AffineSym:
    """Symmetric-matrix-valued function, affine in named symmetric variables.

    ``terms[name]`` has shape (svec_dim(var_dim), dim, dim); slice ``a`` is
    the coefficient of the a-th svec component of that variable, so that

        value(assignment) = constant + sum_name terms[name] . svec(assignment[name]).
    """

    dim: int
    constant: np.ndarray = None
    terms: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.constant is None:
            self.constant = np.zeros((self.dim, self.dim))
        self.constant = np.asarray(self.constant, dtype=float)
        if self.constant.shape != (self.dim, self.dim):
            raise ValueError("constant must be dim x dim")
        for name, coeffs in self.terms.items():
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.ndim != 3 or coeffs.shape[1:] != (self.dim, self.dim):
                raise ValueError(f"term {name!r} must have shape (nv, dim, dim)")
            self.terms[name] = coeffs

    @classmethod
    def zero(cls, dim: int) -> "AffineSym":
        return cls(dim=dim)

    @classmethod
    def from_constant(cls, mat: np.ndarray) -> "AffineSym":
        mat = np.asarray(mat, dtype=float)
        return cls(dim=mat.shape[0], constant=mat.copy())

    @classmethod
    def variable(cls, name: str, dim: int) -> "AffineSym":
        """The identity map on one symmetric variable."""
        return cls(dim=dim, terms={name: svec_basis(dim).copy()})

    @property
    def var_dims(self) -> Dict[str, int]:
        out = {}
        for name, coeffs in self.terms.items():
            nv = coeffs.shape[0]
            d = int((np.sqrt(8 * nv + 1) - 1) / 2 + 0.5)
            if svec_dim(d) != nv:
                raise ValueError(f"term {name!r} has invalid svec length {nv}")
            out[name] = d
        return out

    @property
    def is_homogeneous(self) -> bool:
        return not self.constant.any()

    def __call__(self, assignment: Dict[str, np.ndarray]) -> np.ndarray:
        out = self.constant.copy()
        for name, coeffs in self.terms.items():
            if name not in assignment:
                raise KeyError(f"missing value for variable {name!r}")
            out += np.tensordot(svec(symmetrize(assignment[name])), coeffs, axes=1)
        return symmetrize(out)

    def _merged(self, other: "AffineSym", sign: float) -> "AffineSym":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        terms = {k: v.copy() for k, v in self.terms.items()}
        for name, coeffs in other.terms.items():
            if name in terms:
                terms[name] = terms[name] + sign * coeffs
            else:
                terms[name] = sign * coeffs
        return AffineSym(self.dim, self.constant + sign * other.constant, terms)

    def __add__(self, other: "AffineSym") -> "AffineSym":
        return self._merged(other, 1.0)

    def __sub__(self, other: "AffineSym") -> "AffineSym":
        return self._merged(other, -1.0)

    def scaled(self, c: float) -> "AffineSym":
        return AffineSym(
            self.dim, c * self.constant, {k: c * v for k, v in self.terms.items()}
        )

    def congruence(self, X: np.ndarray) -> "AffineSym":
        """The map value -> X^T value X."""
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.dim:
            raise ValueError("congruence factor has wrong row count")
        terms = {k: np.matmul(X.T, np.matmul(v, X)) for k, v in self.terms.items()}
        return AffineSym(X.shape[1], X.T @ self.constant @ X, terms)

    def embed(self, dim_out: int, offset: int = 0) -> "AffineSym":
        """Place this block at the given diagonal offset of a larger zero matrix."""
        if offset < 0 or offset + self.dim > dim_out:
            raise ValueError("embedded block does not fit")
        X = np.zeros((self.dim, dim_out))
        X[:, offset : offset + self.dim] = np.eye(self.dim)
        # X has shape (dim, dim_out): value -> X^T value X places the block
        return self.congruence(X)


@dataclass(eq=False)
class MultiplierSet:
    """Multiplier and terminal cost, affine in the PSD variables S and R."""

    multiplier: AffineSym
    terminal_cost: AffineSym
    psd_vars: Tuple[Tuple[str, int], ...]


def _staircase(order: int, coeffs: np.ndarray) -> np.ndarray:
    """diag(E, 3E, ..., (2N+1)E) for every basis slice E; shape (nv, ns, ns)."""
    nv, l, _ = coeffs.shape
    ns = (order + 1) * l
    out = np.zeros((nv, ns, ns))
    for k in range(order + 1):
        sl = slice(k * l, (k + 1) * l)
        out[:, sl, sl] = (2 * k + 1) * coeffs
    return out


def transport_energy_multiplier(order: int, width: int, speed: float):
    """Boundary energy-balance IQC of the transport channel.

    Returns the multiplier rho * diag(S, -S, 0) on [z(0); z(1); state] and
    the terminal cost -diag(S, 3S, ..., (2N+1)S), both affine in "S".
    """
    if speed <= 0:
        raise ValueError("transport speed must be positive")
    l = width
    n_state = (order + 1) * l
    dim = 2 * l + n_state
    basis = svec_basis(l)
    nv = basis.shape[0]

    m_coeffs = np.zeros((nv, dim, dim))
    m_coeffs[:, :l, :l] = speed * basis
    m_coeffs[:, l : 2 * l, l : 2 * l] = -speed * basis
    multiplier = AffineSym(dim, terms={"S": m_coeffs})

    z_coeffs = -_staircase(order, basis)
    terminal = AffineSym(n_state, terms={"S": z_coeffs})
    return multiplier, terminal


def transport_input_multiplier(order: int, width: int) -> AffineSym:
    """Input-to-interior energy IQC of the transport channel, zero terminal cost.

    Returns diag(R, 0, -diag(R, 3R, ..., (2N+1)R)), affine in "R".
    """
    l = width
    n_state = (order + 1) * l
    dim = 2 * l + n_state
    basis = svec_basis(l)
    nv = basis.shape[0]

    coeffs = np.zeros((nv, dim, dim))
    coeffs[:, :l, :l] = basis
    coeffs[:, 2 * l :, 2 * l :] = -_staircase(order, basis)
    return AffineSym(dim, terms={"R": coeffs})


def transport_multipliers(order: int, width: int, speed: float) -> MultiplierSet:
    """Sum of both transport IQCs; terminal cost comes from the balance part."""
    m1, z1 = transport_energy_multiplier(order, width, speed)
    m2 = transport_input_multiplier(order, width)
    return MultiplierSet(
        multiplier=m1 + m2,
        terminal_cost=z1,
        psd_vars=(("S", width), ("R", width)),
    )


def iqc_residual(
    M: np.ndarray,
    Z: np.ndarray,
    psi_trace: np.ndarray,
    xi_end: np.ndarray,
    dt: float,
) -> float:
    """Finite-horizon IQC value: trapezoid of psi^T M psi plus the terminal cost.

    ``psi_trace`` holds uniform samples, one row per time; a nonnegative
    result (up to quadrature error) is what the multiplier lemmas promise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    psi = np.atleast_2d(np.asarray(psi_trace, dtype=float))
    M = np.asarray(M, dtype=float)
    if psi.shape[1] != M.shape[0]:
        raise ValueError("trace width does not match the multiplier")
    quad = np.einsum("ti,ij,tj->t", psi, M, psi)
    xi_end = np.asarray(xi_end, dtype=float).ravel()
    Z = np.asarray(Z, dtype=float)
    if Z.size and xi_end.size != Z.shape[0]:
        raise ValueError("terminal state does not match the terminal cost")
    terminal = float(xi_end @ Z @ xi_end) if Z.size else 0.0
    return float(np.trapezoid(quad, dx=dt) + terminal)
