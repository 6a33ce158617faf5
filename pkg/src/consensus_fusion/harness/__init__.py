"""Synthetic data, toy base learners and experiment drivers."""

from .data import PRESETS, SyntheticSpec, generate_synthetic, run_base_methods, synthetic_ensemble
from .experiments import (
    ablation,
    build_ensembles,
    epsilon_tradeoff,
    fusion_quality,
    imbalance,
    parameter_grid,
    parameter_sweep,
    robustness,
    scaling_experiment,
)
from .noise import ablate_component, inject_imbalance, inject_random_classifier, inject_random_clusterer
from .report import ExperimentReport

__all__ = [
    "PRESETS",
    "ExperimentReport",
    "SyntheticSpec",
    "ablate_component",
    "ablation",
    "build_ensembles",
    "epsilon_tradeoff",
    "fusion_quality",
    "generate_synthetic",
    "imbalance",
    "inject_imbalance",
    "inject_random_classifier",
    "inject_random_clusterer",
    "parameter_grid",
    "parameter_sweep",
    "robustness",
    "run_base_methods",
    "scaling_experiment",
    "synthetic_ensemble",
]
