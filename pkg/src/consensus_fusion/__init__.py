"""Fuse hard outputs of base classifiers and base clusterers into class distributions."""

from .core import EnsembleInput, build_cooccurrence, build_group_catalog, build_membership, build_votes
from .errors import FusionError, NumericalError, ValidationError
from .objective import ObjectiveParams, eval_objective
from .pipeline import FusionResult, build_consensus_matrices, fuse
from .solver import SolverConfig, SolverResult, solve

__version__ = "0.1.0"

__all__ = [
    "EnsembleInput",
    "FusionError",
    "FusionResult",
    "NumericalError",
    "ObjectiveParams",
    "SolverConfig",
    "SolverResult",
    "ValidationError",
    "build_consensus_matrices",
    "build_cooccurrence",
    "build_group_catalog",
    "build_membership",
    "build_votes",
    "eval_objective",
    "fuse",
    "solve",
]
