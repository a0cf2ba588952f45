"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or configuration violates a documented contract."""


class NumericalError(RuntimeError):
    """Training or evaluation produced non-finite values."""
