"""Finite-n discrete-event simulator of the d-choices system."""

from ._backend import backend_name, forced_backend
from .runner import SimConfig, SimResult, compare_fixed_points, kurtz_experiment, run

__all__ = [
    "SimConfig",
    "SimResult",
    "run",
    "kurtz_experiment",
    "compare_fixed_points",
    "backend_name",
    "forced_backend",
]
