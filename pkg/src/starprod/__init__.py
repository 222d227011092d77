"""Exact Fedosov star products, natural equivalences and quantum moment maps on a polynomial chart."""

__version__ = "0.1.0"

from .cochain import (
    BidiffOperator,
    DiffOperator,
    EquivalenceSeries,
    FormalFunction,
    StarProduct,
    apply_equivalence,
    construct_equivalence,
    extract_connection,
    moyal_product,
    naturality_check,
)
from .fedosov import extract_cochains, flat_section, solve_r, star_multiply
from .geom import ChartGeometry, VectorField, validate_geometry
from .polycore import Poly, parse_poly
from .weylalg import Truncation, WeylAlgebra, WeylSection

__all__ = [
    "BidiffOperator",
    "ChartGeometry",
    "DiffOperator",
    "EquivalenceSeries",
    "FormalFunction",
    "Poly",
    "StarProduct",
    "Truncation",
    "VectorField",
    "WeylAlgebra",
    "WeylSection",
    "apply_equivalence",
    "construct_equivalence",
    "extract_cochains",
    "extract_connection",
    "flat_section",
    "moyal_product",
    "naturality_check",
    "parse_poly",
    "solve_r",
    "star_multiply",
    "validate_geometry",
]
