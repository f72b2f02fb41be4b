"""Stability certification of LTI systems coupled to 1-D transport PDEs.

The pipeline turns a delay system into a plant plus transport uncertainty,
builds a Legendre projection filter and its IQC multipliers, and decides
robust stability through two projected matrix inequalities.  Independent
oracles (delay spectra, exact transport solutions) validate every step.
"""

from .legendre import LegendreTable, deriv_matrix, ell, value
from .linalg import block_diag, nullspace_basis, sym_eig_min
from .lmi import (
    FEASIBLE,
    INCONCLUSIVE,
    INFEASIBLE,
    FeasibilityVerdict,
    LmiProblem,
    boundary_constraint,
    build_problem,
    dissipation_form,
    export_sdpa,
    solve,
)
from .model import (
    FilterRealization,
    Interconnection,
    LtiSystem,
    PdeSpec,
    build_filter,
    build_interconnection,
    chatter_matrices,
    from_time_delay,
    heat_uncertainty,
    simulate_filter,
)
from .multipliers import (
    AffineSym,
    MultiplierSet,
    iqc_residual,
    transport_energy_multiplier,
    transport_input_multiplier,
    transport_multipliers,
)
from .oracle import DdeSpectrum, dde_abscissa, stable_intervals
from .sweep import (
    CertificationReport,
    GridSpec,
    SweepConfig,
    certify_point,
    run_sweep,
)

__version__ = "0.1.0"
