"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``residual`` carries the last error estimate when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedRepresentationError(TypeError):
    """The exact path was asked to handle a non piecewise-linear operand."""


class SpecError(ValueError):
    """Malformed JSON spec; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
