"""Parameter estimation for linear SPDEs observed under measurement noise."""

from .spectral_model import ModeSpec, ModelRecipe, SpectralModel, build_model, clip_inv, clip_low
from .simulator import GridRule, ObservationRecord, TimeGrid, simulate_observations, under_resolved_fraction
from .estimator import EstimatorResult, estimate
from .information import info_In, lower_bound_rate, nonparametric_rate, parametric_rate, rate_report
from .hellinger import (
    equivalence_series, hellinger_bound_commuting, hellinger_scalar, largest_separation, minimax_report,
)
from .harness import ExperimentConfig, run_experiment

__all__ = [
    "ModeSpec", "ModelRecipe", "SpectralModel", "build_model", "clip_inv", "clip_low",
    "GridRule", "ObservationRecord", "TimeGrid", "simulate_observations", "under_resolved_fraction",
    "EstimatorResult", "estimate",
    "info_In", "lower_bound_rate", "nonparametric_rate", "parametric_rate", "rate_report",
    "equivalence_series", "hellinger_bound_commuting", "hellinger_scalar", "largest_separation",
    "minimax_report",
    "ExperimentConfig", "run_experiment",
]
