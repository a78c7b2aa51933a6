"""Exception hierarchy shared by every kpzlab module."""


class KpzlabError(Exception):
    """Base class for all kpzlab errors."""


class DomainError(KpzlabError, ValueError):
    """An argument lies outside the domain of a function."""


class ParameterError(KpzlabError, ValueError):
    """A configuration or size parameter is out of range."""


class EvaluationError(KpzlabError, ArithmeticError):
    """An integrand returned a non-finite value.

    ``node`` holds the abscissa at which the bad value appeared.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConvergenceError(KpzlabError, ArithmeticError):
    """An iterative or truncation procedure failed to converge."""


class NumericalError(KpzlabError, ArithmeticError):
    """A linear-algebra step broke down (singular matrix, eigensolver failure)."""
