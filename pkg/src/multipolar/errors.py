"""Exception hierarchy shared by all modules."""


class MultipolarError(Exception):
    """Base class for every error raised by the package."""


class DomainError(MultipolarError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ValidationError(MultipolarError, ValueError):
    """A configuration or request is malformed or violates an invariant."""


class DivergenceError(MultipolarError, ArithmeticError):
    """An integral does not converge for the given parameters."""


class ConvergenceError(MultipolarError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The partial result is attached so callers can still report it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class FitError(MultipolarError, ValueError):
    """Too few usable points to fit a rate."""
