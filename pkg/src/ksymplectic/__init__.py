"""Stochastic K-symplectic Runge–Kutta integrators for the stochastic Lotka–Volterra model."""

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, TableauParseError
from .brownian import BrownianGrid, sample
from .model import LV_PARAMS, LogState, ModelParams, State
from .tableau import KprkTableau, KrkTableau, scheme
from .integrate import StepperConfig, StepperKind, Trajectory, integrate, scheme_config

__all__ = [
    "ConvergenceError",
    "DomainError",
    "TableauParseError",
    "BrownianGrid",
    "sample",
    "LV_PARAMS",
    "LogState",
    "ModelParams",
    "State",
    "KprkTableau",
    "KrkTableau",
    "scheme",
    "StepperConfig",
    "StepperKind",
    "Trajectory",
    "integrate",
    "scheme_config",
]
