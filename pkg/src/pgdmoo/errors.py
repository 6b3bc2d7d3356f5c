class PgdMooError(Exception):
    """Base class for package errors."""


class ConfigurationError(PgdMooError, ValueError):
    pass


class ShapeError(PgdMooError, ValueError):
    pass


class DomainError(PgdMooError, ValueError):
    """Design outside the problem's box bounds."""


class NonFiniteError(PgdMooError, FloatingPointError):
    """Raised when training or sampling hits NaN/inf."""


class ParseError(PgdMooError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EvaluationUnavailable(PgdMooError, RuntimeError):
    """Dataset has no known analytic problem, so designs cannot be scored."""
