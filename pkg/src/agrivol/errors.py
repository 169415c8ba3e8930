"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data violates a documented precondition (bad shape, range, or schema)."""


class NumericalError(RuntimeError):
    """An estimation, optimization, or sampling step failed numerically."""
