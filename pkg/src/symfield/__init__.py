"""
symfield: random walks on symmetric groups, their partition-algebra
expectations, large-N limits, lasso-word Wilson loops and ramified coverings.
"""

from . import diagrams, limit_engine, tensor_oracle, walk_sim
from .diagrams import Partition
from .errors import (
    CapacityError,
    DimensionError,
    GeometryError,
    NotReducible,
    NumericalError,
    SymfieldError,
    ValidationError,
)
from .limit_engine import LimitClass, transposition_limit
from .walk_sim import Estimate, FiniteClass, estimate, transposition_class

__all__ = [
    "diagrams", "limit_engine", "tensor_oracle", "walk_sim",
    "Partition", "LimitClass", "FiniteClass", "Estimate",
    "estimate", "transposition_class", "transposition_limit",
    "SymfieldError", "ValidationError", "DimensionError", "CapacityError",
    "NumericalError", "GeometryError", "NotReducible",
]

__version__ = "0.1.0"
