"""Cumulant-truncated mean-field hierarchy (orders 1, 2 and 3)."""

from .backend import HAVE_KERNELS, make_rhs, rhs, rhs_linear, select_backend
from .reference import rhs_linear_reference, rhs_reference
from .state import (HierarchyState, OneAtomTerms, TwoAtomTensors,
                    build_one_atom_terms, build_two_atom_tensors,
                    from_density_matrix, get_expectation, initial_all_excited,
                    initial_ground, n_pairs, n_triples, pair_table,
                    triple_table)

__all__ = [
    "HAVE_KERNELS",
    "HierarchyState",
    "OneAtomTerms",
    "TwoAtomTensors",
    "build_one_atom_terms",
    "build_two_atom_tensors",
    "from_density_matrix",
    "get_expectation",
    "initial_all_excited",
    "initial_ground",
    "make_rhs",
    "n_pairs",
    "n_triples",
    "pair_table",
    "rhs",
    "rhs_linear",
    "rhs_linear_reference",
    "rhs_reference",
    "select_backend",
    "triple_table",
]
