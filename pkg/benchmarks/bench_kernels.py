"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--reps 200]

Both implementations get identical inputs and must return identical results;
the script stops if they do not.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from fpqueue import kernels
from fpqueue.diffusion_sim import _BRIDGE_COARSE, _BRIDGE_FINE, _NORMAL, _gens
from fpqueue.distributions import Exponential
from fpqueue.queue_sim import QueueConfig, build_population
from fpqueue.rng import stream_key, substream
from fpqueue.scaling import diffusion_params


def _timed(fn, repeat: int = 3):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_busy_period(n: int, reps: int):
    cfg = QueueConfig(n=n, alpha=0.5)
    inputs = []
    for r in range(reps):
        g = substream(1, r, "bench-bp")
        pop = build_population(cfg, g)
        inputs.append((pop.draw_clocks(g), pop.scaled_services, pop.n_initial_pool, pop.extra_scaled))

    def run(impl):
        return [impl.first_busy_period(*a) for a in inputs]

    return _timed(lambda: run(kernels)), _timed(lambda: run(kernels.fallback))


def bench_hitting_times(dt: float, reps: int, bridge: bool):
    p = diffusion_params(Exponential(1.0), 0.0, beta=1.0, q=1.0)
    key = stream_key(1, "bench-diffusion")
    steps = int(math.ceil(50.0 / dt))

    def run(impl):
        idx = range(reps)
        fine = _gens(key, idx, _BRIDGE_FINE) if bridge else None
        coarse = _gens(key, idx, _BRIDGE_COARSE) if bridge else None
        return impl.hitting_times(p.q, p.beta, p.gamma, dt, p.sigma * math.sqrt(dt), p.sigma2 * dt, steps,
                                  _gens(key, idx, _NORMAL), fine, coarse)

    return _timed(lambda: run(kernels), 1), _timed(lambda: run(kernels.fallback), 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    print(f"active kernels: {kernels.IMPLEMENTATION}")
    if kernels.compiled() is None:
        print("extension not built; both columns time the fallback")
    rows = []
    for n in (1_000, 10_000):
        (tc, a), (tp, b) = bench_busy_period(n, args.reps)
        if a != b:
            raise SystemExit("busy-period kernels disagree")
        rows.append((f"first busy period n={n}", args.reps, tc, tp))
    for dt, bridge in ((1e-3, False), (1e-3, True), (1e-4, False)):
        reps = max(1, args.reps // (10 if dt < 1e-3 else 1))
        (tc, a), (tp, b) = bench_hitting_times(dt, reps, bridge)
        if not np.array_equal(a, b, equal_nan=True):
            raise SystemExit("hitting-time kernels disagree")
        rows.append((f"hitting times dt={dt:g}{' bridge' if bridge else ''}", reps, tc, tp))
    print(f"{'kernel':34s} {'reps':>6s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s}")
    for name, reps, tc, tp in rows:
        print(f"{name:34s} {reps:6d} {tc:11.3f} {tp:10.3f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
