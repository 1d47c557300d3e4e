"""Heisenberg ferromagnet ground-state evolution versus heat-flow product states.

The package compares ``exp(-μH)`` applied to a sharp spin configuration
with the product state built from the heat flow of its indicator, and
expands their difference with a splitting series and a polymer expansion.
"""
from .lattice import Lattice, build_lattice, evolve_heat, graph_distance, heat_kernel, parse_lattice
from .product import ProductState, ap_expectation, ap_inner, rho
from .quantum import ObservableA, SectorBasis, WaveVector, expectation_a, propagate, sharp_state
from .splitting import BudgetExceeded, kick, op_apply, signed_kick_sum, truncated_r

__all__ = [
    "Lattice",
    "build_lattice",
    "parse_lattice",
    "graph_distance",
    "heat_kernel",
    "evolve_heat",
    "SectorBasis",
    "WaveVector",
    "ObservableA",
    "sharp_state",
    "propagate",
    "expectation_a",
    "ProductState",
    "rho",
    "ap_expectation",
    "ap_inner",
    "op_apply",
    "kick",
    "signed_kick_sum",
    "truncated_r",
    "BudgetExceeded",
]
