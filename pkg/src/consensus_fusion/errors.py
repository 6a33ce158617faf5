"""Exception types shared across the package."""


class FusionError(Exception):
    """Base class for all errors raised by consensus_fusion."""


class ValidationError(FusionError, ValueError):
    """Input data or configuration violates a documented precondition."""


class NumericalError(FusionError, ArithmeticError):
    """A numerical routine hit a degenerate case (zero row sum, zero denominator)."""
