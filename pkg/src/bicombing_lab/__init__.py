"""Barycenters, transport and integration on spaces with conical bicombings."""

from .barycenter import BarycenterConfig, bar_measure, bar_n, bar_star, lemma23_gap
from .errors import (
    BicombingError,
    BudgetError,
    ConvergenceError,
    DomainError,
    PrecisionError,
    RangeError,
    SchemaError,
)
from .integrate import BoxDomain, GridMap, convolve, cube_extend, riemann_integral
from .reversibilize import bicombing_from_midpoint, symmetric_midpoint
from .spaces import (
    MetricTree,
    NormedSpace,
    TreePoint,
    conical_check,
    distance,
    geodesic_eval,
    hull_contains,
    space_from_json,
)
from .transport import FiniteMeasure, wasserstein

__all__ = [
    "BarycenterConfig",
    "BicombingError",
    "BoxDomain",
    "BudgetError",
    "ConvergenceError",
    "DomainError",
    "FiniteMeasure",
    "GridMap",
    "MetricTree",
    "NormedSpace",
    "PrecisionError",
    "RangeError",
    "SchemaError",
    "TreePoint",
    "bar_measure",
    "bar_n",
    "bar_star",
    "bicombing_from_midpoint",
    "conical_check",
    "convolve",
    "cube_extend",
    "distance",
    "geodesic_eval",
    "hull_contains",
    "lemma23_gap",
    "riemann_integral",
    "space_from_json",
    "symmetric_midpoint",
    "wasserstein",
]
