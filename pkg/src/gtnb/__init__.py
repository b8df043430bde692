"""Intruding items in Bernoulli group testing.

Exact law and falling moments of the COMP intruder count ``G``, negative
binomial approximations with Stein-Chen error bounds, two-stage COMP
planning, and seeded Monte Carlo validation.
"""

from .core import (
    DecodeResult,
    DefectiveSet,
    GroupTestInstance,
    OutcomeVector,
    TestMatrix,
    decode_comp,
    decode_dd,
    generate_design,
    run_tests,
    run_two_stage,
)
from .errors import DegenerateError, GroupTestingError, NumericalError, ResourceGuardError
from .reports import BoundReport
from .special import regularized_upper_gamma

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "DecodeResult",
    "DefectiveSet",
    "DegenerateError",
    "GroupTestInstance",
    "GroupTestingError",
    "NumericalError",
    "OutcomeVector",
    "ResourceGuardError",
    "TestMatrix",
    "decode_comp",
    "decode_dd",
    "generate_design",
    "regularized_upper_gamma",
    "run_tests",
    "run_two_stage",
]
