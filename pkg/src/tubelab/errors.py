"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where the map is defined."""


class NotInTube(ValueError):
    """The point has no preimage in the half-cylinder."""


class BoundViolation(ArithmeticError):
    """A quantitative bound that should hold was observed to fail."""
