"""Discriminative disaggregation sparse coding (DDSC) for household energy data."""

from ddsc.core import (
    Activations,
    ApplianceDataset,
    Dictionary,
    DisaggModel,
    PenaltyMode,
    TrainConfig,
    UsageMatrix,
    make_dataset,
)
from ddsc.disaggregate import Mode, MetricsReport, evaluate, mae, nde, predict, sae
from ddsc.discriminative import disaggregation_solve, perceptron_step, train_ddsc
from ddsc.nnsc import compute_target_activations, train_nnsc
from ddsc.solver import project_dictionary, solve_activations, update_dictionary

__all__ = [
    "Activations",
    "ApplianceDataset",
    "Dictionary",
    "DisaggModel",
    "MetricsReport",
    "Mode",
    "PenaltyMode",
    "TrainConfig",
    "UsageMatrix",
    "compute_target_activations",
    "disaggregation_solve",
    "evaluate",
    "mae",
    "make_dataset",
    "nde",
    "perceptron_step",
    "predict",
    "project_dictionary",
    "sae",
    "solve_activations",
    "train_ddsc",
    "train_nnsc",
    "update_dictionary",
]
