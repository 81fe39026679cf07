"""Sparse polynomial one-step models, inversion control and set-membership
stability validation for unknown nonlinear SISO systems."""

from .identify import DataSet, IdentConfig, IdentResult, identify_model
from .invert import ControllerConfig, control, normalization_constants
from .poly import AffineScaler, BasisTerm, PolyModel, UniPoly
from .sim import Plant, Scenario, Trajectory, make_plant, run_closed_loop
from .validate import ValidationReport, gamma_min, select_mu

__all__ = [
    "AffineScaler",
    "BasisTerm",
    "ControllerConfig",
    "DataSet",
    "IdentConfig",
    "IdentResult",
    "Plant",
    "PolyModel",
    "Scenario",
    "Trajectory",
    "UniPoly",
    "ValidationReport",
    "control",
    "gamma_min",
    "identify_model",
    "make_plant",
    "normalization_constants",
    "run_closed_loop",
    "select_mu",
]
