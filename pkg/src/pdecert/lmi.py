"""Assembly and solution of the stability LMIs as semidefinite feasibility.

The two matrix inequalities of the certification theorem are expressed
affinely in the flat decision vector (svec(P), svec(S), svec(R)), together
with the positive-definiteness side conditions on S and R.  Feasibility is
decided by an interior-point cone solver; the backend contract is just
"handles LMI feasibility over the PSD cone", and every witness is
re-verified here by eigenvalue computation before a feasible verdict is
reported.  All constraints in this pipeline are homogeneous, so the solve
is normalized to unit margin and the witness rescaled afterwards.
"""

from __future__ import annotations

import io
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

import clarabel

from .linalg import (
    nullspace_basis,
    smat,
    svec,
    svec_basis,
    svec_dim,
    sym_eig_max,
    sym_eig_min,
)
from .model import Interconnection, LtiSystem, PdeSpec
from .multipliers import AffineSym, MultiplierSet

__all__ = [
    "NEGATIVE",
    "POSITIVE",
    "FEASIBLE",
    "INFEASIBLE",
    "INCONCLUSIVE",
    "LmiVariable",
    "LmiConstraint",
    "LmiProblem",
    "FeasibilityVerdict",
    "dissipation_form",
    "boundary_constraint",
    "build_problem",
    "assemble",
    "AssembledSdp",
    "solve",
    "solve_assembled",
    "verify_witness",
    "export_sdpa",
]

NEGATIVE = "negative"  # constraint sense: value < -margin * I
POSITIVE = "positive"  # constraint sense: value > +margin * I

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LmiVariable:
    name: str
    dim: int
    positive: bool = False  # True: the variable itself must be positive definite


@dataclass(eq=False)
class LmiConstraint:
    """One affine matrix inequality; ``margin`` is relative to the
    constraint's coefficient norm (absolute margins are fixed at assembly)."""

    matrix: AffineSym
    sense: str
    margin: float

    def __post_init__(self):
        if self.sense not in (NEGATIVE, POSITIVE):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.margin <= 0:
            raise ValueError("margin must be positive")


@dataclass(eq=False)
class LmiProblem:
    variables: List[LmiVariable]
    constraints: List[LmiConstraint]
    vacuous_projection: bool = False

    def __post_init__(self):
        declared = {v.name: v.dim for v in self.variables}
        if len(declared) != len(self.variables):
            raise ValueError("duplicate variable names")
        for c in self.constraints:
            for name, dim in c.matrix.var_dims.items():
                if name not in declared:
                    raise ValueError(f"constraint references undeclared variable {name!r}")
                if declared[name] != dim:
                    raise ValueError(
                        f"variable {name!r} used with dimension {dim}, declared {declared[name]}"
                    )

    @property
    def n_scalars(self) -> int:
        return sum(svec_dim(v.dim) for v in self.variables)

    def var_slices(self) -> Dict[str, slice]:
        out, at = {}, 0
        for v in self.variables:
            nv = svec_dim(v.dim)
            out[v.name] = slice(at, at + nv)
            at += nv
        return out

    @property
    def is_homogeneous(self) -> bool:
        return all(c.matrix.is_homogeneous for c in self.constraints)

    def flatten(self, witness: Dict[str, np.ndarray]) -> np.ndarray:
        x = np.zeros(self.n_scalars)
        for v, sl in zip(self.variables, self.var_slices().values()):
            x[sl] = svec(np.asarray(witness[v.name], dtype=float))
        return x

    def unflatten(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        return {
            name: smat(x[sl]) for name, sl in self.var_slices().items()
        }


@dataclass(eq=False)
class FeasibilityVerdict:
    status: str
    witness: Optional[Dict[str, np.ndarray]]
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def dissipation_form(P: AffineSym, M: AffineSym, sys: Interconnection) -> AffineSym:
    """Quadratic storage/supply form of the realization.

    Equals [I 0; A B; C D]^T [0 P 0; P 0 0; 0 0 M] [I 0; A B; C D], i.e.
    He([I 0]^T P [A B]) plus [C D]^T M [C D], affine in the variables of
    P and M.
    """
    n = sys.n_state
    q = sys.in_dim
    if P.dim != n:
        raise ValueError(f"storage block must be {n} x {n}")
    if M.dim != sys.out_dim:
        raise ValueError(f"multiplier block must be {sys.out_dim} x {sys.out_dim}")
    dim = n + q
    W = np.hstack([sys.A, sys.B])
    V = np.hstack([sys.C, sys.D])

    def lift_storage(mat3):
        # He([I 0]^T X W) for every slice X: top rows get X @ W
        out = np.zeros(mat3.shape[:-2] + (dim, dim))
        out[..., :n, :] = np.matmul(mat3, W)
        return out + np.swapaxes(out, -1, -2)

    constant = lift_storage(P.constant[None])[0] + V.T @ M.constant @ V
    terms: Dict[str, np.ndarray] = {}
    for name, coeffs in P.terms.items():
        terms[name] = lift_storage(coeffs)
    for name, coeffs in M.terms.items():
        lifted = np.matmul(V.T, np.matmul(coeffs, V))
        terms[name] = terms[name] + lifted if name in terms else lifted
    return AffineSym(dim, constant, terms)


def boundary_constraint(pde: PdeSpec, plant: LtiSystem, n_filter: int) -> np.ndarray:
    """Matrix whose kernel contains exactly the boundary-compatible directions.

    Acting on col(filter state, plant state, boundary trace), the rows read
    boundary_input * C * X - boundary_selector * trace = 0.
    """
    ml = pde.order * pde.width
    K = pde.boundary_input
    if K.shape[1] != plant.p:
        raise ValueError("boundary_input width must match the plant output")
    return np.hstack(
        [np.zeros((ml, n_filter)), K @ plant.C, -pde.boundary_selector]
    )


def build_problem(
    sys: Interconnection,
    mult: MultiplierSet,
    constraint_matrix: np.ndarray,
    eps: float = 1e-6,
) -> LmiProblem:
    """Feasibility problem in (P, S, R) for the two certification LMIs.

    Constraints: the dissipation form projected onto the kernel of the
    boundary constraint must be negative definite, the storage matrix must
    dominate the terminal cost, and the multiplier variables must be
    positive definite.  ``eps`` is the relative strictness margin.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = sys.n_state
    P = AffineSym.variable("P", n)
    L = dissipation_form(P, mult.multiplier, sys)

    basis = nullspace_basis(np.asarray(constraint_matrix, dtype=float))
    if basis.shape[0] != L.dim:
        raise ValueError("boundary constraint width does not match the realization")
    vacuous = basis.shape[1] == 0
    constraints: List[LmiConstraint] = []
    if vacuous:
        warnings.warn(
            "boundary constraint has a trivial kernel; the projected "
            "dissipation inequality is vacuous and was dropped",
            stacklevel=2,
        )
    else:
        constraints.append(LmiConstraint(L.congruence(basis), NEGATIVE, eps))

    # storage dominates the terminal cost: P - embed(Z) > 0
    positivity = P - mult.terminal_cost.embed(n)
    constraints.append(LmiConstraint(positivity, POSITIVE, eps))

    variables = [LmiVariable("P", n, positive=False)]
    for name, dim in mult.psd_vars:
        variables.append(LmiVariable(name, dim, positive=True))
        constraints.append(
            LmiConstraint(AffineSym.variable(name, dim), POSITIVE, eps)
        )
    return LmiProblem(
        variables=variables, constraints=constraints, vacuous_projection=vacuous
    )


# --- translation to cone form ------------------------------------------------


@dataclass(eq=False)
class AssembledSdp:
    """Cone-program data: find x with b - A x in a product of PSD cones.

    Row block j encodes constraint j as svec rows (solver triangle order);
    senses are folded into the sign of the rows, so every block reads
    "slack PSD".  ``margins`` are the absolute strictness levels derived
    from the relative margins and the per-block coefficient norms.
    """

    A: np.ndarray
    const_svec: np.ndarray  # svec of the (sense-adjusted) constant parts
    block_dims: List[int]
    block_rows: List[slice]
    senses: List[str]
    margins: np.ndarray
    var_slices: Dict[str, slice]
    homogeneous: bool

    def eye_svec(self) -> np.ndarray:
        out = np.zeros(self.A.shape[0])
        for rows, d in zip(self.block_rows, self.block_dims):
            out[rows] = svec(np.eye(d))
        return out

    def rhs(self, unit_margin: bool) -> np.ndarray:
        b = -self.const_svec.copy()
        for rows, d, m in zip(self.block_rows, self.block_dims, self.margins):
            b[rows] -= (1.0 if unit_margin else m) * svec(np.eye(d))
        return b

    def constraint_values(self, x: np.ndarray) -> List[np.ndarray]:
        """Sense-adjusted constraint matrices at x (PSD slack is -value - m I)."""
        vals = self.A @ x + self.const_svec
        return [smat(vals[rows]) for rows in self.block_rows]


def _svec_rows(coeffs: np.ndarray) -> np.ndarray:
    # (nv, d, d) -> (svec_dim(d), nv): one svec column per coefficient slice
    return svec(coeffs).T


def assemble(problem: LmiProblem) -> AssembledSdp:
    """Stack all constraints into one dense coefficient matrix.

    Orientation: for each block, rows are the svec components of the
    sense-adjusted constraint value sigma * A_j(x), with sigma = +1 for
    "negative" senses and -1 for "positive" ones, so feasibility always
    reads sigma * A_j(x) + margin * I <= 0.
    """
    var_slices = problem.var_slices()
    nvar = problem.n_scalars
    blocks, consts, dims, senses, margins = [], [], [], [], []
    for c in problem.constraints:
        d = c.matrix.dim
        sign = 1.0 if c.sense == NEGATIVE else -1.0
        rows = np.zeros((svec_dim(d), nvar))
        for name, coeffs in c.matrix.terms.items():
            rows[:, var_slices[name]] = sign * _svec_rows(coeffs)
        blocks.append(rows)
        consts.append(sign * svec(c.matrix.constant))
        dims.append(d)
        senses.append(c.sense)
        col_norms = np.linalg.norm(rows, axis=0)
        scale = max(1.0, float(col_norms.max(initial=0.0)), float(np.linalg.norm(consts[-1])))
        margins.append(c.margin * scale)

    row_slices, at = [], 0
    for rows in blocks:
        row_slices.append(slice(at, at + rows.shape[0]))
        at += rows.shape[0]
    return AssembledSdp(
        A=np.vstack(blocks) if blocks else np.zeros((0, nvar)),
        const_svec=np.concatenate(consts) if consts else np.zeros(0),
        block_dims=dims,
        block_rows=row_slices,
        senses=senses,
        margins=np.array(margins),
        var_slices=var_slices,
        homogeneous=problem.is_homogeneous,
    )


_STATUS_FEASIBLE = {"Solved", "AlmostSolved"}
_STATUS_INFEASIBLE = {"PrimalInfeasible"}


def solve_assembled(
    asm: AssembledSdp,
    tol: float = 1e-7,
    max_iter: int = 100,
) -> FeasibilityVerdict:
    """Decide feasibility of an assembled problem with the cone solver.

    Homogeneous problems are solved at unit margin (their feasible set is a
    cone, so strict feasibility at any margin is equivalent) and the witness
    is scaled back to the declared absolute margins.  A feasible verdict is
    only issued once the witness passes the eigenvalue re-check at half of
    every declared margin.
    """
    nvar = asm.A.shape[1]
    unit = asm.homogeneous
    b = asm.rhs(unit_margin=unit)
    cones = [clarabel.PSDTriangleConeT(d) for d in asm.block_dims]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.max_iter = max_iter

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(
        sp.csc_matrix((nvar, nvar)),
        np.zeros(nvar),
        sp.csc_matrix(asm.A),
        b,
        cones,
        settings,
    )
    sol = solver.solve()
    elapsed = time.perf_counter() - t0
    status = str(sol.status)
    diagnostics: Dict[str, object] = {
        "solver_status": status,
        "iterations": int(sol.iterations),
        "solve_time": elapsed,
        "unit_margin_normalized": unit,
        "margins_required": asm.margins.copy(),
    }

    if status in _STATUS_INFEASIBLE:
        return FeasibilityVerdict(INFEASIBLE, None, diagnostics)
    if status not in _STATUS_FEASIBLE:
        return FeasibilityVerdict(INCONCLUSIVE, None, diagnostics)

    x = np.asarray(sol.x, dtype=float)
    achieved = np.array(
        [-sym_eig_max(v) for v in asm.constraint_values(x)]
    )
    if unit:
        if np.any(achieved <= 0.0):
            diagnostics["margins_achieved"] = achieved
            return FeasibilityVerdict(INCONCLUSIVE, None, diagnostics)
        scale = float(max(1.0, np.max(asm.margins / achieved)))
        x = scale * x
        achieved = achieved * scale
        diagnostics["witness_scale"] = scale
    diagnostics["margins_achieved"] = achieved
    if np.any(achieved < 0.5 * asm.margins):
        # solver tolerance leaked through; never report feasible on trust
        return FeasibilityVerdict(INCONCLUSIVE, None, diagnostics)
    witness = {name: smat(x[sl]) for name, sl in asm.var_slices.items()}
    return FeasibilityVerdict(FEASIBLE, witness, diagnostics)


def solve(problem: LmiProblem, tol: float = 1e-7, max_iter: int = 100) -> FeasibilityVerdict:
    """Assemble and solve an LMI feasibility problem."""
    verdict = solve_assembled(assemble(problem), tol=tol, max_iter=max_iter)
    verdict.diagnostics["vacuous_projection"] = problem.vacuous_projection
    return verdict


def verify_witness(
    problem: LmiProblem,
    witness: Dict[str, np.ndarray],
    margins: Optional[Sequence[float]] = None,
) -> Tuple[bool, np.ndarray]:
    """Eigenvalue re-check of a witness, independent of any solver output.

    Returns (ok, achieved) where achieved[j] is the strictness margin of
    constraint j at the witness; ok requires every margin to clear half of
    the declared absolute level.
    """
    asm_margins = np.asarray(
        margins if margins is not None else assemble(problem).margins, dtype=float
    )
    achieved = []
    for c in problem.constraints:
        val = c.matrix(witness)
        achieved.append(-sym_eig_max(val) if c.sense == NEGATIVE else sym_eig_min(val))
    achieved = np.array(achieved)
    return bool(np.all(achieved >= 0.5 * asm_margins)), achieved


def export_sdpa(problem: LmiProblem, path: str) -> None:
    """Write the problem in sparse SDPA format (.dat-s) for external solvers.

    Encoded as: find x maximizing 0 subject to sum_i x_i F_i^(j) - F0^(j)
    being PSD per block, where block j carries constraint j folded to
    "sigma * A_j(x) + margin * I <= 0" exactly as in :func:`assemble`.
    """
    asm = assemble(problem)
    nvar = asm.A.shape[1]
    buf = io.StringIO()
    buf.write(f'"pdecert LMI feasibility export; {len(asm.block_dims)} blocks"\n')
    buf.write(f"{nvar} = mDIM\n")
    buf.write(f"{len(asm.block_dims)} = nBLOCK\n")
    buf.write(" ".join(str(d) for d in asm.block_dims) + " = bLOCKsTRUCT\n")
    buf.write(" ".join("0.0" for _ in range(nvar)) + "\n")

    def emit(matno: int, blk: int, mat: np.ndarray):
        d = mat.shape[0]
        for i in range(d):
            for j in range(i, d):
                v = mat[i, j]
                if v != 0.0:
                    buf.write(f"{matno} {blk} {i + 1} {j + 1} {v!r}\n")

    for bi, (rows, d, m) in enumerate(
        zip(asm.block_rows, asm.block_dims, asm.margins), start=1
    ):
        # PSD slack is -sigma*A(x) - const - margin*I = sum_i x_i F_i - F0
        F0 = smat(asm.const_svec[rows]) + m * np.eye(d)
        emit(0, bi, F0)
        for i in range(nvar):
            Fi = smat(-asm.A[rows, i])
            emit(i + 1, bi, Fi)

    with open(path, "w") as fh:
        fh.write(buf.getvalue())
