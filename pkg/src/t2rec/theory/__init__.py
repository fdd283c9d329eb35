"""Computable pieces of the convergence analysis and their empirical checks."""

from .bounds import (
    BoundInputs,
    BoundReport,
    WidthSchedule,
    approx_bound,
    depth_constant,
    entropy_bound,
    lipschitz_constant,
    noise_constant,
    rate_exponent,
    rate_report,
    scale_constant,
    width_schedule,
)
from .dimension import DEFAULT_SCALES, box_counts, minkowski_dimension
from .embedding import embed_network, embedding_param_budget
from .lipschitz import LipschitzReport, NetFamily, perturb, perturbation_ratio, verify_lipschitz

__all__ = [
    "BoundInputs",
    "BoundReport",
    "WidthSchedule",
    "approx_bound",
    "depth_constant",
    "entropy_bound",
    "lipschitz_constant",
    "noise_constant",
    "rate_exponent",
    "rate_report",
    "scale_constant",
    "width_schedule",
    "DEFAULT_SCALES",
    "box_counts",
    "minkowski_dimension",
    "embed_network",
    "embedding_param_budget",
    "LipschitzReport",
    "NetFamily",
    "perturb",
    "perturbation_ratio",
    "verify_lipschitz",
]
from .rate import CellFailure, RateCell, RateTable, empirical_rate_experiment, log_log_slope  # noqa: E402

__all__ += ["CellFailure", "RateCell", "RateTable", "empirical_rate_experiment", "log_log_slope"]
