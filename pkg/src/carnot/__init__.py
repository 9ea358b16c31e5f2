"""Exact and numerical workbench for Carnot groups.

Stratified Lie algebras from structure constants, the BCH group law in
exponential coordinates, Tanaka prolongation and rigidity, precontact vector
fields, the semidirect doubling with its global contact flows, and numerical
probes of flows and distortion.
"""

from .algebra import (StratifiedLieAlgebra, catalog, catalog_names, filiform, free2step, heisenberg,
                      load_algebra, loads_algebra, upper_triangular_nilradical)
from .group import CarnotGroup, carnot_group
from .linalg import Gaussian
from .poly import Poly, PolynomialVectorField
from .prolongation import classify_rigidity, prol_bracket, prolong, rank_one_search, strata_derivations
from .semidirect import double, tau_differential, tau_flow, tau_lift
from .vector_fields import frame_expand, is_precontact, precontact_space, vf_bracket

__version__ = "0.1.0"

__all__ = [
    "CarnotGroup",
    "Gaussian",
    "Poly",
    "PolynomialVectorField",
    "StratifiedLieAlgebra",
    "carnot_group",
    "catalog",
    "catalog_names",
    "classify_rigidity",
    "double",
    "filiform",
    "frame_expand",
    "free2step",
    "heisenberg",
    "is_precontact",
    "load_algebra",
    "loads_algebra",
    "precontact_space",
    "prol_bracket",
    "prolong",
    "rank_one_search",
    "strata_derivations",
    "tau_differential",
    "tau_flow",
    "tau_lift",
    "upper_triangular_nilradical",
    "vf_bracket",
]
