import math

import numpy as np
import pytest

from fpqueue import kernels
from fpqueue.diffusion_sim import (
    deterministic_hitting_time,
    hitting_time_of_zero,
    hitting_times,
    hitting_times_all,
    simulate_w,
)
from fpqueue.scaling import DiffusionParams, reflect

EXP0 = DiffusionParams(1.0, 1.0, 0.5, math.sqrt(2.0))


def test_deterministic_quadratic_without_drift():
    p = DiffusionParams(1.0, 0.0, 0.5, 0.0)
    path = simulate_w(p, 3.0, 1e-3, np.random.default_rng(0))
    t = path.times
    assert np.allclose(path.values, 1 - t**2 / 2, atol=1e-12)
    assert abs(hitting_time_of_zero(path) - math.sqrt(2)) <= 1e-3


def test_reflected_parabola():
    p = DiffusionParams(0.0, 1.0, 0.5, 0.0)
    path = simulate_w(p, 4.0, 1e-3, np.random.default_rng(0))
    t = path.times
    inside = t <= 2.0
    assert np.allclose(path.reflected[inside], (t - t**2 / 2)[inside], atol=1e-12)
    assert np.all(path.reflected[t > 2.0 + 1e-9] == 0.0)


def test_deterministic_hitting_time_root():
    p = DiffusionParams(1.0, 1.0, 0.5, 0.0)
    root = 1 + math.sqrt(3)
    assert deterministic_hitting_time(p) == pytest.approx(root)
    dt = 1e-3
    assert 0 <= hitting_time_of_zero(simulate_w(p, 5.0, dt, np.random.default_rng(0))) - root <= dt
    ht = hitting_times(p, 5, 0, dt=dt, horizon=5.0)
    assert np.all(np.abs(ht.fine - root) <= dt)


def test_negative_drift_from_zero_hits_at_first_step():
    p = DiffusionParams(0.0, -1.0, 0.5, 0.0)
    path = simulate_w(p, 1.0, 0.01, np.random.default_rng(0))
    assert hitting_time_of_zero(path) == pytest.approx(0.01)


def test_unhit_path_returns_inf():
    p = DiffusionParams(5.0, 0.0, 0.5, 0.0)
    assert hitting_time_of_zero(simulate_w(p, 1.0, 0.01, np.random.default_rng(0))) == math.inf
    ht = hitting_times(p, 4, 1, dt=0.01, horizon=1.0)
    assert ht.unhit_fraction == 1.0


def test_reflection_idempotent():
    path = simulate_w(EXP0, 5.0, 1e-3, np.random.default_rng(3))
    assert np.array_equal(reflect(path.reflected), path.reflected)
    assert np.all(path.reflected >= 0)


def test_mean_of_w_at_one():
    vals = np.array([simulate_w(EXP0, 1.0, 1e-2, np.random.default_rng(s)).values[-1] for s in range(4000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - EXP0.drift(1.0)) < 4 * se
    assert vals.var(ddof=1) == pytest.approx(2.0, rel=0.1)


def test_gamma_monotonicity_with_common_numbers():
    # a larger quadratic coefficient can only bring the hitting time forward
    lo = hitting_times(DiffusionParams(1.0, 1.0, 0.5, 1.0), 200, 4, dt=1e-3)
    hi = hitting_times(DiffusionParams(1.0, 1.0, 1.0, 1.0), 200, 4, dt=1e-3)
    assert np.all(hi.fine <= lo.fine)


@pytest.mark.parametrize("bridge", [False, True])
def test_compiled_and_fallback_agree(bridge):
    a = hitting_times(EXP0, 30, 9, dt=1e-3, bridge=bridge, impl=kernels)
    b = hitting_times(EXP0, 30, 9, dt=1e-3, bridge=bridge, impl=kernels.fallback)
    assert np.array_equal(a.fine, b.fine)
    assert np.array_equal(a.coarse, b.coarse)


def test_compiled_and_fallback_agree_all_columns():
    a = hitting_times_all(EXP0, 12, 10, 2e-4, impl=kernels)
    b = hitting_times_all(EXP0, 12, 10, 2e-4, impl=kernels.fallback)
    assert np.array_equal(a, b)


def test_grid_structure_of_columns():
    dt = 1e-3
    rows = hitting_times_all(EXP0, 200, 11, dt)
    fine, coarse, fine_b, coarse_b = rows.T
    # naive times sit on their grids, coarse never earlier than fine
    assert np.allclose(fine / dt, np.round(fine / dt))
    assert np.allclose(coarse / (2 * dt), np.round(coarse / (2 * dt)))
    assert np.all(coarse >= fine)
    # a bridge crossing can only come before the first grid point below zero
    assert np.all(fine_b <= fine)
    assert np.all(coarse_b <= coarse)


def test_naive_columns_ignore_bridge_streams():
    with_bridge = hitting_times(EXP0, 50, 2, dt=1e-3, bridge=True)
    rows = hitting_times_all(EXP0, 50, 2, 1e-3)
    plain = hitting_times(EXP0, 50, 2, dt=1e-3)
    assert np.array_equal(plain.fine, rows[:, 0])
    assert np.array_equal(with_bridge.fine, rows[:, 2])


def test_reproducible_and_thread_independent():
    a = hitting_times(EXP0, 40, 5, dt=1e-3, threads=1)
    b = hitting_times(EXP0, 40, 5, dt=1e-3, threads=4)
    c = hitting_times(EXP0, 20, 5, dt=1e-3, threads=2)
    assert np.array_equal(a.fine, b.fine)
    assert np.array_equal(a.fine[:20], c.fine)


@pytest.mark.parametrize("kw", [dict(reps=0), dict(dt=0.0), dict(dt=-1e-3)])
def test_invalid_arguments(kw):
    args = dict(reps=5, dt=1e-3)
    args.update(kw)
    with pytest.raises(ValueError):
        hitting_times(EXP0, args["reps"], 0, dt=args["dt"])
