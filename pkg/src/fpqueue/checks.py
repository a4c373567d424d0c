"""Quick invariant checks run by ``fpqueue check``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .airy import airy
from .distributions import DEFAULT_HYPEREXP, Exponential
from .fpt import FptDensity
from .queue_sim import NO_PARENT, QueueConfig, simulate_path
from .rng import substream
from .scaling import diffusion_params, drift_coefficient, reflect


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _paths(seed: int, reps: int, n: int, alpha: float, method: str):
    cfg = QueueConfig(n=n, alpha=alpha)
    for r in range(reps):
        yield simulate_path(cfg, 3 * n, substream(seed, r, f"check-{method}"), method=method, track_upper=True)


def check_paths(seed: int, reps: int = 20) -> list[CheckResult]:
    bad_reflect = bad_couple = bad_forest = bad_nu = 0
    for method in ("timeline", "step"):
        for p in _paths(seed, reps, 200, 0.5, method):
            if not np.array_equal(p.queue, reflect(p.unreflected)):
                bad_reflect += 1
            if np.any(p.unreflected > p.unreflected_upper):
                bad_couple += 1
            bp = p.first_busy_period()
            if bp is not None:
                par = p.served_parents()[:bp]
                roots = int(np.sum(par == NO_PARENT))
                served = set(p.served_order[:bp].tolist())
                if roots != p.initial_queue or any(x != NO_PARENT and x not in served for x in par):
                    bad_forest += 1
                k = np.arange(1, bp + 1)
                if not np.array_equal(p.nu_size[:bp], k - 1 + p.queue[:bp]):
                    bad_nu += 1
    total = 2 * reps
    return [
        CheckResult("reflection identity", bad_reflect == 0, f"{bad_reflect}/{total} paths violate Q = phi(N)"),
        CheckResult("coupling N <= N^U", bad_couple == 0, f"{bad_couple}/{total} paths violate"),
        CheckResult("forest of first busy period", bad_forest == 0, f"{bad_forest}/{total} invalid forests"),
        CheckResult("|nu_k| in first busy period", bad_nu == 0, f"{bad_nu}/{total} paths disagree"),
    ]


def check_kernels(seed: int, reps: int = 50) -> list[CheckResult]:
    from .queue_sim import build_population

    mism = 0
    cfg = QueueConfig(n=500, alpha=0.5)
    for r in range(reps):
        g = substream(seed, r, "check-kernel")
        pop = build_population(cfg, g)
        clocks = pop.draw_clocks(g)
        a = kernels.first_busy_period(clocks, pop.scaled_services, pop.n_initial_pool, pop.extra_scaled)
        b = kernels.fallback.first_busy_period(clocks, pop.scaled_services, pop.n_initial_pool, pop.extra_scaled)
        mism += a != b
    return [CheckResult(f"busy-period kernel ({kernels.IMPLEMENTATION}) vs numpy", mism == 0,
                        f"{mism}/{reps} mismatches")]


def check_numerics() -> list[CheckResult]:
    xs = np.array([-10.0, -1.0, 0.0, 1.0, 5.0])
    ai, aip, bi, bip = airy(xs)
    w_err = float(np.max(np.abs(ai * bip - aip * bi - 1.0 / math.pi)))
    out = [CheckResult("Airy Wronskian", w_err < 1e-9, f"max error {w_err:.2e}")]
    fa = [drift_coefficient(d, j / 20) for d in (Exponential(1.0), DEFAULT_HYPEREXP) for j in range(21)]
    viol = sum(b < a for a, b in zip(fa[:20], fa[1:21])) + sum(b < a for a, b in zip(fa[21:41], fa[22:42]))
    out.append(CheckResult("f(alpha) nondecreasing", viol == 0, f"{viol} violations on the 0.05 grid"))
    f = FptDensity.from_params(diffusion_params(Exponential(1.0), 0.0, beta=1.0, q=1.0))
    mass = f.normalization()
    out.append(CheckResult("density integrates to 1", abs(mass - 1) < 1e-3, f"mass {mass:.8f}"))
    return out


SUITE: dict[str, Callable[..., list[CheckResult]]] = {
    "paths": check_paths,
    "kernels": check_kernels,
    "numerics": lambda seed: check_numerics(),
}


def run_all(seed: int) -> list[CheckResult]:
    results: list[CheckResult] = []
    for fn in SUITE.values():
        results.extend(fn(seed))
    return results
