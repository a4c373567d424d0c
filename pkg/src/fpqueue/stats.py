"""Monte Carlo summaries, Gaussian kernel density estimates and the KS distance."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

Z95 = 1.96


@dataclass(frozen=True)
class McSummary:
    count: int
    mean: float
    std_error: float
    ci95: tuple[float, float]

    @property
    def degenerate(self) -> bool:
        """True when the interval carries no information (one sample, or no spread)."""
        return self.count < 2 or not math.isfinite(self.std_error) or self.std_error == 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        d["degenerate"] = self.degenerate
        return json.dumps(d)

    def overlaps(self, other: "McSummary") -> bool:
        return not (self.ci95[1] < other.ci95[0] or other.ci95[1] < self.ci95[0])


def summarize(samples) -> McSummary:
    """Mean with standard error (sample std / sqrt(m)) and a normal 95% interval.

    A single sample gives an infinite standard error and interval.
    """
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m == 0:
        raise ValueError("no samples")
    mean = float(math.fsum(x) / m)
    if m < 2:
        return McSummary(1, mean, math.inf, (-math.inf, math.inf))
    # sort before summing so the result does not depend on sample order
    dev = np.sort(x - mean)
    se = math.sqrt(math.fsum(dev * dev) / (m - 1)) / math.sqrt(m)
    return McSummary(int(m), mean, se, (mean - Z95 * se, mean + Z95 * se))


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)


def kde_gaussian(samples, grid, bandwidth: str | float = "silverman", chunk: int = 512) -> np.ndarray:
    """(1 / (m h)) sum_i phi((x - x_i) / h) on ``grid``."""
    x = np.asarray(samples, dtype=float).ravel()
    g = np.asarray(grid, dtype=float)
    if x.size < 2:
        raise ValueError("kde needs at least two samples")
    if bandwidth == "silverman":
        if np.ptp(x) == 0:
            raise ValueError("zero-variance samples have no Silverman bandwidth")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError("bandwidth must be positive")
    flat = g.ravel()
    out = np.zeros(flat.size)
    xs = np.sort(x)
    # only samples within 9 bandwidths contribute beyond double precision
    for i0 in range(0, flat.size, chunk):
        gc = flat[i0:i0 + chunk]
        lo = np.searchsorted(xs, gc.min() - 9.0 * h)
        hi = np.searchsorted(xs, gc.max() + 9.0 * h)
        near = xs[lo:hi]
        acc = np.zeros(gc.size)
        for j0 in range(0, near.size, 8192):
            block = near[j0:j0 + 8192]
            z = (gc[:, None] - block[None, :]) / h
            acc += np.exp(-0.5 * z * z).sum(axis=1)
        out[i0:i0 + chunk] = acc
    out /= x.size * h * math.sqrt(2.0 * math.pi)
    return out.reshape(g.shape)


def ecdf(samples) -> Callable:
    """Right-continuous empirical CDF with a jump of 1/m at each sample."""
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    m = xs.size

    def F(t):
        return np.searchsorted(xs, t, side="right") / m

    return F


def ks_distance(samples, cdf: Callable) -> float:
    """sup_t |F_m(t) - F(t)|, checking both sides of every jump of F_m.

    ``cdf`` is evaluated at each sample and just below it, so a step CDF with
    jumps at the samples gives distance 0.
    """
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    m = xs.size
    if m == 0:
        raise ValueError("no samples")
    finite = np.isfinite(xs)
    at = np.ones(m)
    below = np.ones(m)
    at[finite] = np.asarray(cdf(xs[finite]), dtype=float)
    below[finite] = np.asarray(cdf(np.nextafter(xs[finite], -np.inf)), dtype=float)
    below[xs == -np.inf] = 0.0
    # F_m just after the last of a run of ties is the value at the run's end
    last = np.searchsorted(xs, xs, side="right")
    first = np.searchsorted(xs, xs, side="left")
    upper = last / m
    lower = first / m
    d = max(float(np.max(np.abs(upper - at))), float(np.max(np.abs(lower - below))))
    return min(max(d, 0.0), 1.0)


def ks_two_sample_pvalue(a, b) -> float:
    from scipy.stats import ks_2samp

    return float(ks_2samp(a, b).pvalue)
