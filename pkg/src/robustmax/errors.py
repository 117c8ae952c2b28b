"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class CurveError(ValueError):
    """A utility curve violates its normal-form invariants."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonEquivalentDensityError(ValueError):
    """A density with zero entries was passed where an equivalent one is required."""


class InstanceTooLarge(ValueError):
    """Brute-force oracle refused an instance beyond its size limits."""
