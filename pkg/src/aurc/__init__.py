"""Selective-classification AURC: population weights, plug-in estimators and their statistics."""

__version__ = "0.1.0"

from .estimators import (  # noqa: E402
    EstimatorKind,
    EstimatorReport,
    PopulationSpec,
    evaluate,
    naive_empirical_aurc,
    plugin_aurc,
    population_aurc,
    risk_coverage_curve,
    sele_score,
)
from .losses import CSFKind, LossKind, compute_losses, confidence_score, cross_entropy_loss, softmax, zero_one_loss  # noqa: E402
from .ranking import TiePolicy, WeightKind, compute_weights, rank_ascending  # noqa: E402

__all__ = [
    "CSFKind",
    "EstimatorKind",
    "EstimatorReport",
    "LossKind",
    "PopulationSpec",
    "TiePolicy",
    "WeightKind",
    "compute_losses",
    "compute_weights",
    "confidence_score",
    "cross_entropy_loss",
    "evaluate",
    "naive_empirical_aurc",
    "plugin_aurc",
    "population_aurc",
    "rank_ascending",
    "risk_coverage_curve",
    "sele_score",
    "softmax",
    "zero_one_loss",
]
