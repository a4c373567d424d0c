"""Finite-pool queue with service-dependent arrival clocks.

Simulation of the embedded queue-length chain, its heavy-traffic diffusion
limit, and the Airy-function law of the limiting busy-period length.
"""

from .distributions import Deterministic, Exponential, HyperExponential, parse as parse_distribution
from .queue_sim import QueueConfig, build_population, simulate_path, simulate_first_busy_period_fast
from .scaling import DiffusionParams, diffusion_params, drift_coefficient
from .fpt import FptDensity
from .kernels import IMPLEMENTATION

__all__ = [
    "Deterministic",
    "Exponential",
    "HyperExponential",
    "parse_distribution",
    "QueueConfig",
    "build_population",
    "simulate_path",
    "simulate_first_busy_period_fast",
    "DiffusionParams",
    "diffusion_params",
    "drift_coefficient",
    "FptDensity",
    "IMPLEMENTATION",
]

__version__ = "0.1.0"
