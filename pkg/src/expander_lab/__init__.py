"""Graphical self-expanders over generalized Lawson-Osserman cones.

Numerical construction of radial expander profiles by stable-curve shooting
in log-radius coordinates, with certification of every checkable property:
the reduced ODE residual, invariant-region membership, decay rates at the
tip, the envelope bound at infinity, and Dirichlet uniqueness.
"""

__version__ = "0.1.0"

from .params import (
    EquilibriumClass,
    EquilibriumKind,
    InadmissibleType,
    LomseSpec,
    NonEvenDegree,
    classify_equilibria,
    iter_admissible,
    solvable_case,
    validate_type,
)
from .solver import (
    ExpanderProfile,
    NoConvergence,
    RegionViolation,
    UniquenessReport,
    asymptotic_angle,
    build_expander,
    check_envelope,
    dirichlet_solve,
    small_r_exponent,
    uniqueness_check,
)

__all__ = [
    "EquilibriumClass",
    "EquilibriumKind",
    "ExpanderProfile",
    "InadmissibleType",
    "LomseSpec",
    "NoConvergence",
    "NonEvenDegree",
    "RegionViolation",
    "UniquenessReport",
    "asymptotic_angle",
    "build_expander",
    "check_envelope",
    "classify_equilibria",
    "dirichlet_solve",
    "iter_admissible",
    "small_r_exponent",
    "solvable_case",
    "uniqueness_check",
    "validate_type",
    "__version__",
]
