"""Simulation and exact verification tools for weighted recursive trees."""

from .theta import AsymptoticConstants, solve_theta, x_n
from .trees import Tree, diameter, enumerate_wrt, grow_pat, grow_wrt, height, mrca
from .weights import FitnessSequence, WeightSequence, modified_sequence, pat_weights

__version__ = "0.1.0"

__all__ = [
    "AsymptoticConstants", "FitnessSequence", "Tree", "WeightSequence", "diameter",
    "enumerate_wrt", "grow_pat", "grow_wrt", "height", "modified_sequence", "mrca",
    "pat_weights", "solve_theta", "x_n",
]
