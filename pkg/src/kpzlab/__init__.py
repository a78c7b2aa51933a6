"""Numerics for the narrow-wedge KPZ/SHE Laplace transform, its fractional
moments and their upper-tail asymptotics."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DomainError, EvaluationError, KpzlabError,
                     NumericalError, ParameterError)
from .kernel import KernelParams
from .fredholm import (Discretization, build_discretization, laplace_transform_value,
                       spectrum, trace_exact)
from .moments import decompose, leading_term, moment, remainder_terms

__all__ = [
    "ConvergenceError", "DomainError", "EvaluationError", "KpzlabError", "NumericalError",
    "ParameterError", "KernelParams", "Discretization", "build_discretization",
    "laplace_transform_value", "spectrum", "trace_exact", "decompose", "leading_term",
    "moment", "remainder_terms",
]
