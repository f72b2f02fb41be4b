"""System data model: plant, PDE uncertainty, projection filter, interconnection.

The projection filter is a marginally stable LTI system whose state stacks
the first ``order + 1`` Legendre projection coefficients of the PDE state.
It is driven purely by the boundary trace of the PDE (the gain from the
plant output is identically zero), which is what makes the interconnected
realization block-diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import legendre

__all__ = [
    "LtiSystem",
    "PdeSpec",
    "FilterRealization",
    "Interconnection",
    "build_filter",
    "build_interconnection",
    "from_time_delay",
    "heat_uncertainty",
    "chatter_matrices",
    "simulate_filter",
]


def _mat(a, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.isfinite(a).all():
        raise ValueError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """State-space realization dx = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, _mat(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n:
            raise ValueError("B row count must match A")
        if self.C.shape[1] != n:
            raise ValueError("C column count must match A")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError("D must be p x r")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class PdeSpec:
    """Linear 1-D PDE uncertainty z_t = sum_k coeffs[k] d^k z / dx^k on [0, 1].

    ``boundary_selector`` rows pick the combinations of the boundary trace
    that are pinned to the plant output through ``boundary_input``;
    ``output_selector`` picks the feedback signal w from the trace.  The
    boundary trace stacks z and its first order-1 spatial derivatives at
    x = 0 and x = 1.
    """

    order: int
    width: int
    coeffs: tuple
    boundary_selector: np.ndarray
    boundary_input: np.ndarray
    output_selector: np.ndarray

    def __post_init__(self):
        m, l = self.order, self.width
        if m < 1:
            raise ValueError("PDE order must be at least 1")
        if l < 1:
            raise ValueError("channel width must be at least 1")
        coeffs = tuple(_mat(F, f"coeffs[{k}]") for k, F in enumerate(self.coeffs))
        if len(coeffs) != m + 1:
            raise ValueError(f"expected {m + 1} coefficient matrices, got {len(coeffs)}")
        for k, F in enumerate(coeffs):
            if F.shape != (l, l):
                raise ValueError(f"coeffs[{k}] must be {l} x {l}")
        if not coeffs[m].any():
            raise ValueError("leading coefficient matrix must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)
        ks = _mat(self.boundary_selector, "boundary_selector")
        if ks.shape != (m * l, 2 * m * l):
            raise ValueError(f"boundary_selector must be {m * l} x {2 * m * l}")
        sv = np.linalg.svd(ks, compute_uv=False)
        if sv[-1] <= 1e-9:
            raise ValueError("boundary_selector must have full row rank")
        object.__setattr__(self, "boundary_selector", ks)
        ki = _mat(self.boundary_input, "boundary_input")
        if ki.shape[0] != m * l:
            raise ValueError(f"boundary_input must have {m * l} rows")
        object.__setattr__(self, "boundary_input", ki)
        lo = _mat(self.output_selector, "output_selector")
        if lo.shape[1] != 2 * m * l:
            raise ValueError(f"output_selector must have {2 * m * l} columns")
        object.__setattr__(self, "output_selector", lo)

    @property
    def trace_width(self) -> int:
        """Width of the boundary trace vector."""
        return 2 * self.order * self.width


@dataclass(frozen=True, eq=False)
class FilterRealization:
    """Projection filter: state = stacked Legendre coefficients of the PDE state.

    ``inner`` packs the realization with input [plant output; boundary trace]
    and output [boundary trace; state].  The plant-output columns of B and D
    are identically zero.
    """

    inner: LtiSystem
    order: int
    width: int
    pde_order: int
    plant_output_dim: int

    @property
    def n_state(self) -> int:
        return (self.order + 1) * self.width

    @property
    def trace_width(self) -> int:
        return 2 * self.pde_order * self.width

    @property
    def out_dim(self) -> int:
        return self.trace_width + self.n_state

    @property
    def A_state(self) -> np.ndarray:
        return self.inner.A

    @property
    def B_output(self) -> np.ndarray:
        return self.inner.B[:, : self.plant_output_dim]

    @property
    def B_trace(self) -> np.ndarray:
        return self.inner.B[:, self.plant_output_dim :]

    @property
    def C_state(self) -> np.ndarray:
        return self.inner.C

    @property
    def D_output(self) -> np.ndarray:
        return self.inner.D[:, : self.plant_output_dim]

    @property
    def D_trace(self) -> np.ndarray:
        return self.inner.D[:, self.plant_output_dim :]


@dataclass(frozen=True, eq=False)
class Interconnection:
    """Realization of the filter wrapped around the plant, driven by the trace."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n_filter: int

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, _mat(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("inconsistent state dimension")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError("D must match C rows and B columns")
        if not 0 <= self.n_filter <= n:
            raise ValueError("n_filter out of range")

    @property
    def n_state(self) -> int:
        return self.A.shape[0]

    @property
    def in_dim(self) -> int:
        return self.B.shape[1]

    @property
    def out_dim(self) -> int:
        return self.C.shape[0]


def build_filter(pde: PdeSpec, order: int) -> FilterRealization:
    """Closed-form projection filter for a first- or second-order PDE.

    The state coupling is sum_i (-1)^i Ftil_i * LN^i and the trace gain
    stacks sum_{j>=i} Ftil_j (-LN)^(j-i) [-ones_alt, ones] column blocks,
    one per derivative level of the trace.
    """
    if pde.order not in (1, 2):
        raise ValueError("filter construction is only available for PDE order 1 or 2")
    if order < 0:
        raise ValueError("projection order must be nonnegative")
    m, l = pde.order, pde.width
    n_state = (order + 1) * l
    p = pde.boundary_input.shape[1]

    LN = legendre.deriv_matrix(order, l)
    # powers of LN and the block-replicated coefficient matrices
    ftil = [np.kron(np.eye(order + 1), F) for F in pde.coeffs]
    ones = np.kron(np.ones((order + 1, 1)), np.eye(l))
    ones_alt = np.kron(np.array([[(-1.0) ** k] for k in range(order + 1)]), np.eye(l))
    edge = np.hstack([-ones_alt, ones])

    A_state = np.zeros((n_state, n_state))
    for i in range(m + 1):
        A_state += (-1.0) ** i * ftil[i] @ np.linalg.matrix_power(LN, i)

    b_blocks = []
    for i in range(1, m + 1):
        Bi = np.zeros((n_state, 2 * l))
        for j in range(i, m + 1):
            Bi += ftil[j] @ np.linalg.matrix_power(-LN, j - i) @ edge
        b_blocks.append(Bi)
    B_trace = np.hstack(b_blocks)

    trace_width = 2 * m * l
    B = np.hstack([np.zeros((n_state, p)), B_trace])
    C = np.vstack([np.zeros((trace_width, n_state)), np.eye(n_state)])
    D = np.hstack(
        [
            np.zeros((trace_width + n_state, p)),
            np.vstack([np.eye(trace_width), np.zeros((n_state, trace_width))]),
        ]
    )
    inner = LtiSystem(A_state, B, C, D)
    return FilterRealization(
        inner=inner, order=order, width=l, pde_order=m, plant_output_dim=p
    )


def build_interconnection(
    plant: LtiSystem, filt: FilterRealization, output_selector: np.ndarray
) -> Interconnection:
    """Series interconnection of the filter with [plant * selector; identity].

    With the projection filter (zero gain from the plant output) the blocks
    reduce to A = diag(A_filter, A_plant), B = [B_trace; B_plant * selector],
    C = [C_filter, 0], D = D_trace.
    """
    Lsel = _mat(output_selector, "output_selector")
    q = filt.trace_width
    if Lsel.shape != (plant.r, q):
        raise ValueError(
            f"output_selector must be {plant.r} x {q}, got {Lsel.shape}"
        )
    if filt.plant_output_dim != plant.p:
        raise ValueError("filter plant-output width must match the plant")
    A = np.block(
        [
            [filt.A_state, filt.B_output @ plant.C],
            [np.zeros((plant.n, filt.n_state)), plant.A],
        ]
    )
    B = np.vstack([filt.B_output @ plant.D @ Lsel + filt.B_trace, plant.B @ Lsel])
    C = np.hstack([filt.C_state, filt.D_output @ plant.C])
    D = filt.D_output @ plant.D @ Lsel + filt.D_trace
    return Interconnection(A=A, B=B, C=C, D=D, n_filter=filt.n_state)


def from_time_delay(A, B, h: float):
    """Convert dx = A x + B x(t - h) into a plant plus transport uncertainty.

    The delayed state travels through a transport channel of speed 1 / h on
    [0, 1]; the channel input is pinned to the full plant state (C = I) and
    the channel output at x = 1 feeds back into the plant.
    """
    if h <= 0:
        raise ValueError("delay must be positive")
    A = _mat(A, "A")
    B = _mat(B, "B")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise ValueError("A and B must be square and of equal size")
    plant = LtiSystem(A=A, B=B, C=np.eye(n), D=np.zeros((n, n)))
    rho = 1.0 / h
    pde = PdeSpec(
        order=1,
        width=n,
        coeffs=(np.zeros((n, n)), -rho * np.eye(n)),
        boundary_selector=np.hstack([np.eye(n), np.zeros((n, n))]),
        boundary_input=np.eye(n),
        output_selector=np.hstack([np.zeros((n, n)), np.eye(n)]),
    )
    return plant, pde


def heat_uncertainty(plant: LtiSystem, diffusivity: float) -> PdeSpec:
    """Heat-equation uncertainty z_t = gamma z_xx with z(0) = y, z_x(1) = 0.

    The output selector returns the derivative half of the boundary trace.
    No multiplier family ships for this spec; it exists to exercise the
    second-order filter construction.
    """
    if diffusivity <= 0:
        raise ValueError("diffusivity must be positive")
    l = plant.p
    z = np.zeros((l, l))
    i = np.eye(l)
    return PdeSpec(
        order=2,
        width=l,
        coeffs=(z, z, diffusivity * np.eye(l)),
        boundary_selector=np.block([[i, z, z, z], [z, z, z, i]]),
        boundary_input=np.vstack([i, z]),
        output_selector=np.block([[z, z, i, z], [z, z, z, i]]),
    )


def chatter_matrices(k: float = 2.0):
    """Four-state regenerative machining-vibration benchmark with gain k."""
    A = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-10.0 - k, 10.0, 0.0, 0.0],
            [5.0, -15.0, 0.0, -0.25],
        ]
    )
    B = np.zeros((4, 4))
    B[2, 0] = k
    return A, B


def simulate_filter(
    filt: FilterRealization,
    forcing: Callable[[np.ndarray], np.ndarray],
    times: np.ndarray,
) -> np.ndarray:
    """Integrate the filter state driven by a boundary-trace signal.

    ``forcing`` maps an array of times to trace samples of shape
    (len(times), trace_width).  Uses the exponential midpoint/Simpson rule
    (exact in the state coupling, fourth order in the forcing), so the
    marginally stable filter poses no step-size restriction.  The grid must
    be uniform; place forcing kinks on grid nodes to keep full order.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need at least two time points")
    dt = times[1] - times[0]
    if dt <= 0 or not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("time grid must be uniform and increasing")

    A = filt.A_state
    Bt = filt.B_trace
    E = scipy.linalg.expm(A * dt)
    Eh = scipy.linalg.expm(A * (dt / 2.0))

    u_nodes = np.asarray(forcing(times), dtype=float)
    u_mid = np.asarray(forcing(times[:-1] + dt / 2.0), dtype=float)
    if u_nodes.shape != (times.size, filt.trace_width):
        raise ValueError("forcing must return shape (len(times), trace_width)")

    f_nodes = u_nodes @ Bt.T
    f_mid = u_mid @ Bt.T
    w0 = (dt / 6.0) * (E @ f_nodes[:-1].T).T
    w1 = (4.0 * dt / 6.0) * (Eh @ f_mid.T).T
    w2 = (dt / 6.0) * f_nodes[1:]

    out = np.zeros((times.size, filt.n_state))
    x = np.zeros(filt.n_state)
    for i in range(times.size - 1):
        x = E @ x + w0[i] + w1[i] + w2[i]
        out[i + 1] = x
    return out
