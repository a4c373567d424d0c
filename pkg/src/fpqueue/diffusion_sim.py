"""Simulation of W(t) = q + beta t - gamma t^2 + sigma B(t) and its first hitting time of zero."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import run_blocks, stream_key
from .scaling import DiffusionParams, reflect

# counter word 2 separates the three per-replication streams
_NORMAL, _BRIDGE_FINE, _BRIDGE_COARSE = 0, 1, 2


@dataclass
class DiffusionPath:
    dt: float
    values: np.ndarray
    reflected: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt


def _increments(params: DiffusionParams, dt: float, z: np.ndarray, k0: int = 0) -> np.ndarray:
    # exact integral of the drift over each step; only the noise is sampled
    t = np.arange(k0, k0 + z.size, dtype=float) * dt
    sdt = params.sigma * math.sqrt(dt)
    return (params.beta - params.gamma * (2.0 * t + dt)) * dt + sdt * z


def simulate_w(params: DiffusionParams, horizon: float, dt: float, rng: np.random.Generator) -> DiffusionPath:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > horizon:
        raise ValueError("dt must not exceed the horizon")
    steps = int(math.floor(horizon / dt + 1e-9))
    z = rng.standard_normal(steps)
    w = np.cumsum(np.concatenate(([params.q], _increments(params, dt, z))))
    return DiffusionPath(dt, w, reflect(w))


def hitting_time_of_zero(path: DiffusionPath) -> float:
    """First grid time k >= 1 at which the reflected path is at zero (the free path is <= 0).

    Returns +inf when the path stays positive over its horizon.
    """
    hit = np.flatnonzero(path.values[1:] <= 0.0)
    return float((hit[0] + 1) * path.dt) if hit.size else math.inf


def _gens(key, reps: range, word: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.Philox(key=key, counter=[0, 0, word, r])) for r in reps]


@dataclass
class HittingTimes:
    """Hitting-time samples on the grid ``dt`` and on the coarser grid ``2 dt`` of the same paths."""

    dt: float
    fine: np.ndarray
    coarse: np.ndarray
    bridge: bool

    @property
    def unhit_fraction(self) -> float:
        return float(np.mean(~np.isfinite(self.fine))) if self.fine.size else 0.0


def hitting_times(params: DiffusionParams, reps: int, seed: int, dt: float = 1e-4, horizon: float = 50.0,
                  bridge: bool = False, threads: int | None = None, tag: str = "diffusion",
                  impl=None) -> HittingTimes:
    """Monte Carlo hitting times of zero, one independent path per replication.

    With ``bridge=True`` a Brownian-bridge crossing test is applied between
    grid points, which removes most of the upward bias of the grid rule.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    impl = impl or kernels
    key = stream_key(seed, tag)
    max_steps = int(math.ceil(horizon / dt))
    sdt = params.sigma * math.sqrt(dt)
    s2dt = params.sigma**2 * dt

    def block(idx: range):
        normal = _gens(key, idx, _NORMAL)
        fine = _gens(key, idx, _BRIDGE_FINE) if bridge else None
        coarse = _gens(key, idx, _BRIDGE_COARSE) if bridge else None
        out = impl.hitting_times(params.q, params.beta, params.gamma, dt, sdt, s2dt, max_steps, normal, fine, coarse)
        return list(out)

    rows = np.asarray(run_blocks(block, reps, threads)).reshape(reps, 4)
    if bridge:
        return HittingTimes(dt, rows[:, 2].copy(), rows[:, 3].copy(), True)
    return HittingTimes(dt, rows[:, 0].copy(), rows[:, 1].copy(), False)


def hitting_times_all(params: DiffusionParams, reps: int, seed: int, dt: float, horizon: float = 50.0,
                      threads: int | None = None, tag: str = "diffusion", impl=None) -> np.ndarray:
    """Raw (reps, 4) table: grid rule at dt and 2 dt, bridge rule at dt and 2 dt."""
    impl = impl or kernels
    key = stream_key(seed, tag)
    max_steps = int(math.ceil(horizon / dt))
    sdt = params.sigma * math.sqrt(dt)
    s2dt = params.sigma**2 * dt

    def block(idx: range):
        return list(impl.hitting_times(params.q, params.beta, params.gamma, dt, sdt, s2dt, max_steps,
                                       _gens(key, idx, _NORMAL), _gens(key, idx, _BRIDGE_FINE),
                                       _gens(key, idx, _BRIDGE_COARSE)))

    return np.asarray(run_blocks(block, reps, threads)).reshape(reps, 4)


def deterministic_hitting_time(params: DiffusionParams) -> float:
    """Positive root of q + beta t - gamma t^2."""
    q, b, g = params.q, params.beta, params.gamma
    return (b + math.sqrt(b * b + 4.0 * g * q)) / (2.0 * g)
