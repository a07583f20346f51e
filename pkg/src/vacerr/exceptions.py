"""Exception hierarchy shared by all modules."""


class VacError(Exception):
    """Base class for all errors raised by vacerr."""


class InvalidArgumentError(VacError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateSubspaceError(VacError, ArithmeticError):
    """Spanning vectors are linearly dependent under the inner product."""


class DegenerateProjectionError(DegenerateSubspaceError):
    """Projected eigenfunctions are (numerically) linearly dependent."""


class SingularMassMatrixError(VacError, ArithmeticError):
    """The instantaneous correlation matrix C(0) is numerically zero."""


class ResolutionError(VacError, ArithmeticError):
    """A reference oracle cannot resolve the requested modes."""


class DivisionGuardError(VacError, ZeroDivisionError):
    """An eigenvalue gap needed as a denominator is not positive."""


class InsufficientDataError(VacError, ValueError):
    """The trajectory is too short for the requested estimate."""


class ConfigError(VacError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
