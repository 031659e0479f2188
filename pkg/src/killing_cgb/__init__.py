"""Numerical Chern-Gauss-Bonnet and Hirzebruch signature balance for 4-manifolds with Killing fields."""

from .catalog import CatalogEntry, catalog_listing, catalog_metric, hyperbolic_space, known_invariants
from .killing import EULER, PONTRYAGIN, KillingField, transgression_at
from .tensor_core import DomainError, GeometryError, MetricChart, Tolerances, riemann

__all__ = [
    "CatalogEntry",
    "DomainError",
    "EULER",
    "GeometryError",
    "KillingField",
    "MetricChart",
    "PONTRYAGIN",
    "Tolerances",
    "catalog_listing",
    "catalog_metric",
    "hyperbolic_space",
    "known_invariants",
    "riemann",
    "transgression_at",
]

__version__ = "0.1.0"
