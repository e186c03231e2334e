"""Transient analysis and verification tools for the bulk queue M(t)|M[k,B]|1."""

from .dessim import SimEstimate, estimate, simulate_path
from .model import GridConfig, QueueConfig, StateVector, marginals, total_mass, x_norm
from .rates import RateFunction, constant, piecewise, sinusoid
from .transient import Trajectory, solve, step, uniformization

__version__ = "0.1.0"

__all__ = [
    "GridConfig",
    "QueueConfig",
    "StateVector",
    "RateFunction",
    "SimEstimate",
    "Trajectory",
    "constant",
    "estimate",
    "marginals",
    "piecewise",
    "simulate_path",
    "sinusoid",
    "solve",
    "step",
    "total_mass",
    "uniformization",
    "x_norm",
]
