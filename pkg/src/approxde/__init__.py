"""Approximate differential equivalences of polynomial ODE systems with
guaranteed error bounds."""
from .bounds import (
    BoundCertificate,
    certify,
    delta_from_constraint,
    fundamental_matrices,
    jacobian,
    jacobian_norm_bounds,
    lambda_bounds,
    remainder_coefficients,
    validate_monte_carlo,
)
from .equivalence import coarsest_partition, coarsest_partition_frozen, equiv_distance, refine_step
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    PIVP,
    ExtendedPIVP,
    Partition,
    extend,
    gen_htree,
    instantiate,
    parse_model,
    serialize_model,
)
from .numerics import integrate, inf_norm, invert, lsq_project
from .polynomial import Polynomial
from .reference import (
    ConstraintSystem,
    build_constraints,
    quotient_bde,
    quotient_fde,
    solve_reference,
)

__version__ = "0.1.0"

__all__ = [
    "BoundCertificate", "ConstraintSystem", "ExtendedPIVP", "KERNEL_BACKEND", "PIVP", "Partition",
    "Polynomial", "build_constraints", "certify", "coarsest_partition", "coarsest_partition_frozen",
    "delta_from_constraint", "equiv_distance", "extend", "fundamental_matrices", "gen_htree",
    "inf_norm", "instantiate", "integrate", "invert", "jacobian", "jacobian_norm_bounds",
    "lambda_bounds", "lsq_project", "parse_model", "quotient_bde", "quotient_fde", "refine_step",
    "remainder_coefficients", "serialize_model", "solve_reference", "validate_monte_carlo",
]
