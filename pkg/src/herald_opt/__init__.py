"""Design of heralded non-Gaussian states from Gaussian sources.

Given a target Fock superposition and a photon-count heralding pattern, find
the Gaussian core parameters that produce it and the damping that maximises
the heralding probability.
"""

from .cases import reproduce_table1, solve_core
from .gaussian import (
    Configuration,
    CoreMatrixSpec,
    DampingVector,
    HeraldPattern,
    assemble_A,
    assemble_B,
    normalization_Z,
    physicality_margin,
)
from .oracle import oracle_check
from .polysolve import SolveOptions, maximize_success, maximize_underdetermined, optimize_damping
from .stellar import TargetSuperposition, dk_coefficients, hafnian_with_multiplicity, target_rhs

__all__ = [
    "Configuration",
    "CoreMatrixSpec",
    "DampingVector",
    "HeraldPattern",
    "SolveOptions",
    "TargetSuperposition",
    "assemble_A",
    "assemble_B",
    "dk_coefficients",
    "hafnian_with_multiplicity",
    "maximize_success",
    "maximize_underdetermined",
    "normalization_Z",
    "optimize_damping",
    "oracle_check",
    "physicality_margin",
    "reproduce_table1",
    "solve_core",
    "target_rhs",
]
