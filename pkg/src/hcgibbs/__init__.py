"""Boundary laws and Gibbs measures of hard-core models on Cayley trees."""

from .analytic_branches import i2_branches, i2_poly, i3_branches, i3_poly
from .boundary_laws import InvariantSet, WeaklyPeriodicLaw, lift_reduced
from .hc_graphs import HINGE, PIPE, WAND, FertileGraph, fertile_graph
from .solver import SolutionRecord, System, critical_lambda, solve, solve_invariant, sweep
from .tree_oracle import build_tree, check_consistency, enumerate_admissible

__all__ = [
    "FertileGraph",
    "HINGE",
    "InvariantSet",
    "PIPE",
    "SolutionRecord",
    "System",
    "WAND",
    "WeaklyPeriodicLaw",
    "build_tree",
    "check_consistency",
    "critical_lambda",
    "enumerate_admissible",
    "fertile_graph",
    "i2_branches",
    "i2_poly",
    "i3_branches",
    "i3_poly",
    "lift_reduced",
    "solve",
    "solve_invariant",
    "sweep",
]
