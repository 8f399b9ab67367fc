"""Exception types shared across the package."""


class SymfieldError(Exception):
    """Base class for all library errors."""


class ValidationError(SymfieldError, ValueError):
    """Malformed input: bad JSON, broken invariants, unknown names."""


class DimensionError(ValidationError):
    """Operands live on different numbers of columns or matrix sizes."""


class CapacityError(SymfieldError):
    """A requested size exceeds the configured computational bound."""


class NumericalError(SymfieldError, ArithmeticError):
    """A numerical procedure failed (singular system, uncontrolled tail)."""


class GeometryError(ValidationError):
    """Invalid loop geometry (non-simple polygon, points outside the disk)."""


class NotReducible(SymfieldError):
    """A lasso word falls outside the analytic rule set."""
