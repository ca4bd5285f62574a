"""Subsemigroup enumeration for finite semigroups given by Cayley tables."""

from .errors import SubsemiError
from .search import (
    EnumerationResult,
    SearchOptions,
    enumerate_brute,
    enumerate_min_extensions,
    enumerate_mingen,
    torso_enumerate,
)
from .table import CayleyTable, IndexSet, closure, is_closed, read_table, validate
from .transform import Transformation, full_transformation_table

__all__ = [
    "CayleyTable",
    "EnumerationResult",
    "IndexSet",
    "SearchOptions",
    "SubsemiError",
    "Transformation",
    "closure",
    "enumerate_brute",
    "enumerate_min_extensions",
    "enumerate_mingen",
    "full_transformation_table",
    "is_closed",
    "read_table",
    "torso_enumerate",
    "validate",
]

__version__ = "0.1.0"
