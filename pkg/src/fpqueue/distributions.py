"""Service-requirement laws with closed-form fractional moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MOMENT_RANGE = (0.0, 3.0)


def _check_order(r: float) -> float:
    r = float(r)
    if not (MOMENT_RANGE[0] <= r <= MOMENT_RANGE[1]):
        raise ValueError(f"moment order {r} outside [0, 3]")
    return r


class ServiceDistribution:
    """Base class. Subclasses provide ``sample``, ``moment`` and ``to_dict``."""

    kind: str = ""

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def moment(self, r: float) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def mean(self) -> float:
        return self.moment(1.0)


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    value: float = 1.0
    kind = "deterministic"

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError("deterministic value must be positive")

    def sample(self, rng, count):
        if count < 0:
            raise ValueError("count must be nonnegative")
        return np.full(int(count), float(self.value))

    def moment(self, r):
        return float(self.value) ** _check_order(r)

    def to_dict(self):
        return {"kind": self.kind, "value": float(self.value)}


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError("exponential rate must be positive")

    def sample(self, rng, count):
        if count < 0:
            raise ValueError("count must be nonnegative")
        return rng.standard_exponential(int(count)) / self.rate

    def moment(self, r):
        r = _check_order(r)
        return math.gamma(1.0 + r) / self.rate**r

    def to_dict(self):
        return {"kind": self.kind, "rate": float(self.rate)}


@dataclass(frozen=True)
class HyperExponential(ServiceDistribution):
    probs: tuple = (0.5, 0.5)
    rates: tuple = (1.0, 1.0)
    kind = "hyperexponential"

    def __post_init__(self):
        p = tuple(float(x) for x in self.probs)
        r = tuple(float(x) for x in self.rates)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "rates", r)
        if len(p) == 0 or len(p) != len(r):
            raise ValueError("probs and rates must be nonempty and of equal length")
        if any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        if any(not (x > 0 and math.isfinite(x)) for x in r):
            raise ValueError("rates must be positive")

    def sample(self, rng, count):
        if count < 0:
            raise ValueError("count must be nonnegative")
        count = int(count)
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(count), side="right")
        idx = np.minimum(idx, len(cum) - 1)
        return rng.standard_exponential(count) / np.asarray(self.rates)[idx]

    def moment(self, r):
        r = _check_order(r)
        g = math.gamma(1.0 + r)
        return sum(p * g / lam**r for p, lam in zip(self.probs, self.rates))

    def to_dict(self):
        return {"kind": self.kind, "probs": list(self.probs), "rates": list(self.rates)}


# the two-phase law used in the reference experiments: mean one, heavy second moment
DEFAULT_HYPEREXP = HyperExponential((0.5, 0.5), (0.501, 250.5))


def from_dict(d: dict) -> ServiceDistribution:
    kind = d.get("kind")
    if kind == "deterministic":
        return Deterministic(float(d["value"]))
    if kind == "exponential":
        return Exponential(float(d["rate"]))
    if kind == "hyperexponential":
        return HyperExponential(tuple(d["probs"]), tuple(d["rates"]))
    raise ValueError(f"unknown distribution kind {kind!r}")


def _floats(text: str) -> Sequence[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse(spec: str | dict | ServiceDistribution) -> ServiceDistribution:
    """Parse a short form such as ``det:1``, ``exp:1`` or ``hyp:0.5,0.5:0.501,250.5``.

    A bare ``hyp`` gives the mean-one two-phase law with rates 0.501 and 250.5.
    Dicts are handed to :func:`from_dict`.
    """
    if isinstance(spec, ServiceDistribution):
        return spec
    if isinstance(spec, dict):
        return from_dict(spec)
    parts = spec.strip().split(":")
    head = parts[0].lower()
    try:
        if head in ("det", "deterministic"):
            return Deterministic(float(parts[1]) if len(parts) > 1 else 1.0)
        if head in ("exp", "exponential"):
            return Exponential(float(parts[1]) if len(parts) > 1 else 1.0)
        if head in ("hyp", "hyperexponential"):
            if len(parts) == 1:
                return DEFAULT_HYPEREXP
            if len(parts) != 3:
                raise ValueError("expected hyp:p1,p2,...:r1,r2,...")
            return HyperExponential(tuple(_floats(parts[1])), tuple(_floats(parts[2])))
    except (IndexError, TypeError) as exc:
        raise ValueError(f"cannot parse distribution {spec!r}") from exc
    raise ValueError(f"unknown distribution {spec!r}")
