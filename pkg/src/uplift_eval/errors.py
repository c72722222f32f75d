"""Semantic exception hierarchy shared by all modules."""


class UpliftEvalError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(UpliftEvalError, ValueError):
    """Input data or configuration violates a documented invariant."""


class ParseError(ValidationError):
    """Malformed input file; carries the offending 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class OverlapViolationError(ValidationError):
    """Propensity outside (0, 1): the unit had no chance of receiving one arm.

    Every downstream estimator divides by the propensity (or its complement),
    so these records are rejected at load instead of producing infinities.
    """


class DomainError(ValidationError):
    """Argument value outside the mathematical domain of an operation."""


class DimensionError(ValidationError):
    """Mismatched lengths between paired sequences."""


class BoundsError(UpliftEvalError, IndexError):
    """Index or integration limit outside the valid range."""


class DegenerateWindowError(UpliftEvalError, ArithmeticError):
    """A local treatment-rate window contains only one arm.

    Signals local overlap failure; the caller must widen the kernel.
    """


class PreconditionError(UpliftEvalError, ValueError):
    """Operation invoked on data that does not satisfy its stated precondition."""
