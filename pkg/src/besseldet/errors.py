"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class AccuracyError(RuntimeError):
    """A quadrature or tail estimate could not reach its target accuracy."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class NumericError(ArithmeticError):
    """Matrix singular to working precision, or a non-finite result."""


class SingularityError(NumericError):
    """An ODE trajectory reached a singular coefficient."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class UnsupportedVariantError(TypeError):
    """Operation not defined for the given weight variant."""
