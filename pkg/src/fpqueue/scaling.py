"""Heavy-traffic constants, path rescaling and the drift curve of the limit."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import ServiceDistribution


@dataclass(frozen=True)
class DiffusionParams:
    """W(t) = q + beta t - gamma t^2 + sigma B(t)."""

    q: float
    beta: float
    gamma: float
    sigma: float

    def __post_init__(self):
        if not self.q >= 0:
            raise ValueError("q must be nonnegative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def sigma2(self) -> float:
        return self.sigma**2

    def drift(self, t):
        return self.q + self.beta * np.asarray(t, dtype=float) - self.gamma * np.asarray(t, dtype=float) ** 2

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "DiffusionParams":
        d = json.loads(text)
        return cls(float(d["q"]), float(d["beta"]), float(d["gamma"]), float(d["sigma"]))


def analytic_lambda(dist: ServiceDistribution, alpha: float) -> float:
    return 1.0 / dist.moment(1.0 + alpha)


def diffusion_params(dist: ServiceDistribution, alpha: float, lam: float | None = None,
                     beta: float = 0.0, q: float = 0.0) -> DiffusionParams:
    """Limit constants for the given service law; ``lam`` defaults to 1/E[S^(1+alpha)]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if lam is None:
        lam = analytic_lambda(dist, alpha)
    m_a = dist.moment(alpha)
    gamma = lam * dist.moment(1.0 + 2.0 * alpha) / (2.0 * m_a)
    sigma2 = lam**2 * m_a * dist.moment(2.0 + alpha)
    return DiffusionParams(float(q), float(beta), float(gamma), math.sqrt(sigma2))


def drift_coefficient(dist: ServiceDistribution, alpha: float) -> float:
    """f(alpha) = E[S^(1+2a)] / (E[S^a] E[S^(1+a)]); nondecreasing in alpha."""
    return dist.moment(1.0 + 2.0 * alpha) / (dist.moment(alpha) * dist.moment(1.0 + alpha))


def drift_curve(params: DiffusionParams, t, reflected: bool = False):
    """q + beta t - gamma t^2, optionally passed through the reflection map."""
    x = params.drift(t)
    if reflected:
        x = reflect(x)
    return x


def reflect(x):
    """phi(x)_k = x_k - min(0, min_{j<=k} x_j)."""
    x = np.asarray(x)
    return x - np.minimum(0, np.minimum.accumulate(x))


class StepFunction:
    """Right-continuous step function t -> values[floor(t * rate)] on [0, len/rate]."""

    def __init__(self, values, rate: float):
        self.values = np.asarray(values, dtype=float)
        self.rate = float(rate)
        if self.values.size == 0:
            raise ValueError("empty path")

    @property
    def horizon(self) -> float:
        return self.values.size / self.rate

    def index(self, t):
        # the tiny offset keeps grid points such as k / rate on the right step
        k = np.floor(np.asarray(t, dtype=float) * self.rate + 1e-9).astype(np.int64)
        return np.clip(k, 0, self.values.size - 1)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("negative time")
        out = self.values[self.index(t_arr)]
        return float(out) if np.ndim(t) == 0 else out


def rescale_path(path, n: int) -> StepFunction:
    """t -> n^(-1/3) X(floor(t n^(2/3))).

    ``path`` is either an integer sequence or an object with a ``queue``
    attribute (an :class:`EmbeddedPath`), in which case the queue is used.
    """
    values = getattr(path, "queue", path)
    n = float(n)
    if n <= 0:
        raise ValueError("n must be positive for rescaling")
    return StepFunction(np.asarray(values, dtype=float) / n ** (1.0 / 3.0), n ** (2.0 / 3.0))
