"""Exact invariants and numerical cone-convergence experiments for polarized
nilpotent Lie groups."""

from .algebra import StructureTensor, Subspace, delta_filtration, subspace_bracket, subspace_lattice, validate
from .deformation import bch_table, deformed_family, dynkin_product, product_difference
from .gradings import Grading, build_asymptotic_grading, build_tangent_grading, classify_grading, cone_tensor, dilate
from .invariants import INFINITY, beta_search, check_cqi, compute_alphas

__all__ = [
    "INFINITY",
    "Grading",
    "StructureTensor",
    "Subspace",
    "bch_table",
    "beta_search",
    "build_asymptotic_grading",
    "build_tangent_grading",
    "check_cqi",
    "classify_grading",
    "compute_alphas",
    "cone_tensor",
    "deformed_family",
    "delta_filtration",
    "dilate",
    "dynkin_product",
    "product_difference",
    "subspace_bracket",
    "subspace_lattice",
    "validate",
]
