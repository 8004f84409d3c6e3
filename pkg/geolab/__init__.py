"""
Geodesic Lab

Closed geodesics of SL2(Z[i]) through the Hurwitz nearest-integer continued
fraction: Gaussian integer arithmetic, the Markov partition and its subshift,
geodesic enumeration, the pressure equation for delta_R, congruence
statistics, character sums and the affine sieve.
"""

from .errors import (
    BoundaryPointError,
    BoundViolationError,
    CertificationError,
    InadmissibleWordError,
    NormBoundError,
    NotLoxodromicError,
)
from .gaussian import GaussianInt, Mat2, ResidueRing, factor, parse_gaussian
from .geodesics import Alphabet, GeodesicClass, enumerate_ball, semigroup_ball
from .hurwitz import Partition, apply_fhat, build_partition
from .subshift import TransitionMatrix, build_transitions, check_irreducible_aperiodic
from .thermo import solve_delta

__version__ = "1.0.0"

__all__ = [
    "Alphabet",
    "BoundViolationError",
    "BoundaryPointError",
    "CertificationError",
    "GaussianInt",
    "GeodesicClass",
    "InadmissibleWordError",
    "Mat2",
    "NormBoundError",
    "NotLoxodromicError",
    "Partition",
    "ResidueRing",
    "TransitionMatrix",
    "apply_fhat",
    "build_partition",
    "build_transitions",
    "check_irreducible_aperiodic",
    "enumerate_ball",
    "factor",
    "parse_gaussian",
    "semigroup_ball",
    "solve_delta",
]
