"""Coresets for geometric prototypes of point-set patterns."""
from .coreset import Coreset, SensitivityProfile, sample_coreset, sensitivities, validate_coreset, weighted_objective
from .errors import ConfigError, DataError, NumericalError, ProtosetError, ShapeError
from .matching import GroundMetric, Pattern, approx_match_cost, cost, emd, match_cost
from .prototype import Instance, Prototype, SolveReport, alternating_minimize, objective, pick_init
from .reduce import jl_project, lift_solution, target_dim

__all__ = [
    "ConfigError",
    "Coreset",
    "DataError",
    "GroundMetric",
    "Instance",
    "NumericalError",
    "Pattern",
    "ProtosetError",
    "Prototype",
    "SensitivityProfile",
    "ShapeError",
    "SolveReport",
    "alternating_minimize",
    "approx_match_cost",
    "cost",
    "emd",
    "jl_project",
    "lift_solution",
    "match_cost",
    "objective",
    "pick_init",
    "sample_coreset",
    "sensitivities",
    "target_dim",
    "validate_coreset",
    "weighted_objective",
]
