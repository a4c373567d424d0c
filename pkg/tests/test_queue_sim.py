import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from fpqueue import kernels
from fpqueue.distributions import DEFAULT_HYPEREXP, Deterministic, Exponential
from fpqueue.queue_sim import (
    NO_PARENT,
    NOT_ARRIVED,
    ChainState,
    QueueConfig,
    build_population,
    busy_period_mc,
    criticality_diagnostic,
    idle_pick,
    simulate_first_busy_period_fast,
    simulate_first_busy_period_step,
    simulate_path,
    simulate_upper_bound,
    step_embedded,
)
from fpqueue.rng import substream
from fpqueue.scaling import reflect

CONFIGS = [
    QueueConfig(n=200, alpha=0.0),
    QueueConfig(n=200, alpha=0.5),
    QueueConfig(n=300, alpha=1.0, dist=DEFAULT_HYPEREXP),
    QueueConfig(n=150, alpha=0.5, dist=Deterministic(1.0), beta=-1.0, q=2.0),
    QueueConfig(n=150, alpha=0.5, initial_law="iid"),
    QueueConfig.fixed_rate(100, 0.75),
    QueueConfig(n=5, alpha=0.5, initial_queue=8),
]
IDS = ["exp0", "exp-half", "hyp1", "det-neg-beta", "iid-initial", "fixed-rate", "extras"]


# ------------------------------------------------------------ configuration

def test_initial_count_rules():
    assert QueueConfig(n=1000).initial_count() == 9  # floor of the float cube root
    assert QueueConfig(n=10**4).initial_count() == 21
    assert QueueConfig(n=8, q=0.01).initial_count() == 1
    assert QueueConfig(n=100, q=0.0).initial_count() == 0
    assert QueueConfig.fixed_rate(10, 0.0).initial_count() == 1
    assert QueueConfig(n=0, initial_queue=3).split_initial() == (0, 3)
    assert QueueConfig(n=5, initial_queue=8).split_initial() == (5, 3)
    assert QueueConfig(n=50, initial_queue=4, initial_law="iid").split_initial() == (0, 4)


@pytest.mark.parametrize(
    "kw",
    [dict(n=-1), dict(n=2.5), dict(n=10, alpha=1.5), dict(n=10, q=-1), dict(n=10, lambda_mode=0.0),
     dict(n=10, time_scale="slow"), dict(n=10, initial_law="x"), dict(n=10, initial_queue=-2)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        QueueConfig(**kw)


def test_population_scaling():
    cfg = QueueConfig(n=1000, alpha=0.5, beta=1.0)
    pop = build_population(cfg, np.random.default_rng(0))
    c = 1 + 1000 ** (-1 / 3)
    assert np.allclose(pop.scaled_services, pop.services * c / 1000)
    assert np.allclose(pop.rates, pop.services**0.5 / math.gamma(2.5))
    raw = build_population(QueueConfig.fixed_rate(10, 0.0), np.random.default_rng(0))
    assert np.array_equal(raw.scaled_services, raw.services)
    assert raw.lam == 0.01


# ------------------------------------------------------------ kernels

@pytest.mark.parametrize("cfg", CONFIGS, ids=IDS)
def test_compiled_and_fallback_busy_period_agree(cfg):
    for r in range(40):
        g = substream(3, r, "kernel-eq")
        pop = build_population(cfg, g)
        clocks = pop.draw_clocks(g)
        args = (clocks, pop.scaled_services, pop.n_initial_pool, pop.extra_scaled)
        assert kernels.first_busy_period(*args) == kernels.fallback.first_busy_period(*args)


@pytest.mark.parametrize("cfg", CONFIGS, ids=IDS)
def test_timeline_path_matches_fast_busy_period(cfg):
    for r in range(30):
        bp = simulate_first_busy_period_fast(cfg, substream(4, r, "tl")).customers_served
        path = simulate_path(cfg, 10 * (cfg.n + 10), substream(4, r, "tl"))
        assert path.first_busy_period() == bp


def test_kernel_edge_cases():
    empty = np.zeros(0)
    for impl in (kernels, kernels.fallback):
        assert impl.first_busy_period(empty, empty, 0, np.ones(3)) == 3
        assert impl.first_busy_period(empty, empty, 0, empty) == 0
        # a clock exactly at the end of a service counts as an arrival during it
        assert impl.first_busy_period(np.array([0.0, 1.0]), np.array([1.0, 5.0]), 1, empty) == 2
        assert impl.first_busy_period(np.array([0.0, 1.5]), np.array([1.0, 5.0]), 1, empty) == 1
        with pytest.raises(ValueError):
            impl.first_busy_period(np.ones(2), np.ones(3), 1, empty)
        with pytest.raises(ValueError):
            impl.first_busy_period(np.ones(2), np.ones(2), 3, empty)


def test_implementation_flag():
    assert kernels.IMPLEMENTATION in ("compiled", "python")
    assert kernels.fallback.IMPLEMENTATION == "python"


# ------------------------------------------------------------ small examples

def test_empty_pool_path():
    cfg = QueueConfig(n=0, initial_queue=3)
    for method in ("timeline", "step"):
        p = simulate_path(cfg, 10, np.random.default_rng(0), method=method)
        assert p.queue.tolist() == [3, 2, 1, 0]
        assert p.first_busy_period() == 3


@pytest.mark.parametrize("i", [1, 2, 7])
def test_empty_pool_busy_period(i):
    cfg = QueueConfig(n=0, initial_queue=i)
    assert simulate_first_busy_period_fast(cfg, np.random.default_rng(1)).customers_served == i
    assert simulate_first_busy_period_step(cfg, np.random.default_rng(1)).customers_served == i


def test_empty_pool_upper_bound_decreases_by_one():
    path, upper = simulate_upper_bound(QueueConfig(n=0, initial_queue=4), 10, np.random.default_rng(0))
    assert path.unreflected.tolist() == [4, 3, 2, 1, 0]
    assert upper.tolist() == [4, 3, 2, 1, 0]


def test_busy_period_needs_initial_customer():
    with pytest.raises(ValueError):
        simulate_first_busy_period_fast(QueueConfig(n=10, q=0.0), np.random.default_rng(0))


def test_step_with_empty_pool_has_no_arrivals():
    pop = build_population(QueueConfig(n=0, initial_queue=2), np.random.default_rng(0))
    state = ChainState(pop, np.random.default_rng(0))
    assert step_embedded(state, np.random.default_rng(1)) == 0


def test_zero_duration_service_has_no_arrivals():
    pop = build_population(QueueConfig(n=20, initial_queue=1), np.random.default_rng(0))
    pop.scaled_services[:] = 0.0
    state = ChainState(pop, np.random.default_rng(0))
    assert step_embedded(state, np.random.default_rng(2)) == 0


def test_expected_arrivals_in_one_step():
    # pool of 2 with exponential clocks of rate 1/2 and a unit service: E[A] = 2 (1 - e^(-1/2))
    cfg = QueueConfig(n=3, alpha=0.0, dist=Deterministic(1.0), lambda_mode=0.5, time_scale="unscaled",
                      initial_queue=1)
    rng = np.random.default_rng(8)
    counts = []
    for _ in range(40_000):
        pop = build_population(cfg, rng)
        counts.append(ChainState(pop, rng).step(rng)[1])
    se = np.std(counts, ddof=1) / math.sqrt(len(counts))
    assert abs(np.mean(counts) - 2 * (1 - math.exp(-0.5))) < 4 * se


def test_idle_pick_two_items():
    rng = np.random.default_rng(0)
    w = np.array([1.0, 2.0])
    picks = np.array([idle_pick(np.arange(2), w, rng) for _ in range(100_000)])
    frac = picks.mean()
    assert abs(frac - 2 / 3) < 4 * math.sqrt(2 / 9 / 1e5)


def test_idle_pick_uniform_for_alpha_zero():
    rng = np.random.default_rng(1)
    picks = [idle_pick(np.arange(5), np.ones(5), rng) for _ in range(50_000)]
    assert sps.chisquare(np.bincount(picks, minlength=5)).pvalue > 0.001


def test_idle_pick_chi_square():
    rng = np.random.default_rng(2)
    w = np.array([1.0, 2.0, 3.0]) ** 0.5
    picks = [idle_pick(np.arange(3), w, rng) for _ in range(100_000)]
    expected = 1e5 * w / w.sum()
    assert sps.chisquare(np.bincount(picks, minlength=3), expected).pvalue > 0.001


def test_idle_pick_empty_pool():
    with pytest.raises(IndexError):
        idle_pick(np.zeros(0, dtype=int), np.ones(3), np.random.default_rng(0))


@pytest.mark.parametrize("method", ["timeline", "step"])
def test_first_pick_size_biased(method):
    # with an empty initial queue the first customer served is the first idle pick
    cfg = QueueConfig(n=3, alpha=1.0, dist=Deterministic(1.0), q=0.0)
    pop = build_population(cfg, np.random.default_rng(0))
    pop.services[:] = [1.0, 2.0, 3.0]
    pop.alpha_weights[:] = pop.services
    first = []
    for r in range(30_000):
        p = simulate_path(cfg, 1, substream(9, r, "pick"), method=method, population=pop)
        first.append(int(p.served_order[0]))
    assert sps.chisquare(np.bincount(first, minlength=3), 30_000 * np.array([1, 2, 3]) / 6).pvalue > 0.001


def test_criticality_examples():
    assert criticality_diagnostic([1, 1, 1]) == 1.0
    assert criticality_diagnostic([2]) == 2.0
    s = Exponential(1.0).sample(np.random.default_rng(3), 10**6)
    assert abs(criticality_diagnostic(s) - 2.0) < 0.02
    with pytest.raises(ValueError):
        criticality_diagnostic([])


def test_fast_and_step_agree_for_tiny_pool():
    # n = 3, one initial customer, deterministic services, lambda = 1
    cfg = QueueConfig(n=3, alpha=0.0, dist=Deterministic(1.0), initial_queue=1)
    a = busy_period_mc(cfg, 200_000, 5, method="fast", tag="tiny")
    b = busy_period_mc(cfg, 200_000, 6, method="step", tag="tiny")
    pa = np.bincount(a, minlength=4) / a.size
    pb = np.bincount(b, minlength=4) / b.size
    assert 0.5 * np.abs(pa - pb).sum() < 0.01


# ------------------------------------------------------------ path invariants

@pytest.fixture(scope="module", params=["timeline", "step"])
def paths(request):
    out = []
    for cfg in CONFIGS:
        for r in range(6):
            p = simulate_path(cfg, 2 * cfg.n + 20, substream(12, r, "inv"), method=request.param,
                              track_upper=True)
            out.append((cfg, p))
    return out


def test_reflection_identity(paths):
    for _, p in paths:
        assert np.array_equal(p.queue, reflect(p.unreflected))
        assert p.queue.dtype.kind == "i"


def test_conservation(paths):
    for cfg, p in paths:
        pool = p.n
        q0 = p.initial_queue
        served = np.arange(p.steps + 1)
        arrived = np.concatenate(([0], np.cumsum(p.arrivals)))
        from_pool = cfg.split_initial()[0]
        # after the queue empties the next customer is picked from the pool without arriving
        idle = np.concatenate(([0], np.cumsum(p.in_system[:-1] == 0)))
        remaining = pool - from_pool - arrived - idle
        # served + waiting + pool remaining = n + extra initial customers
        assert np.all(served + p.in_system + remaining == pool + q0 - from_pool)
        assert np.all(remaining >= 0)


def test_queue_matches_physical_count_in_first_busy_period(paths):
    for _, p in paths:
        bp = p.first_busy_period()
        end = bp + 1 if bp is not None else p.steps + 1
        assert np.array_equal(p.queue[:end], p.in_system[:end])


def test_coupling(paths):
    for _, p in paths:
        assert np.all(p.unreflected <= p.unreflected_upper)
        assert np.all(p.arrivals <= p.arrivals_upper)


def test_forest(paths):
    for _, p in paths:
        bp = p.first_busy_period()
        if bp is None:
            continue
        served = p.served_order[:bp]
        par = p.parent[served]
        assert int(np.sum(par == NO_PARENT)) == p.initial_queue
        pos = {int(c): k for k, c in enumerate(served)}
        for k, c in enumerate(served):
            if par[k] != NO_PARENT:
                # a parent is served before its child, so the parent array is acyclic
                assert pos[int(par[k])] < k
        # tree sizes add up to the busy period
        roots = [int(c) for c, q in zip(served, par) if q == NO_PARENT]
        size = {r: 0 for r in roots}
        for k, c in enumerate(served):
            r = int(c)
            while p.parent[r] != NO_PARENT:
                r = int(p.parent[r])
            size[r] += 1
        assert sum(size.values()) == bp


def test_nu_sizes(paths):
    for _, p in paths:
        bp = p.first_busy_period()
        k = np.arange(1, p.steps + 1)
        end = bp if bp is not None else p.steps
        assert np.array_equal(p.nu_size[:end], (k - 1 + p.queue[:-1])[:end])


def test_unarrived_customers_have_no_parent(paths):
    for _, p in paths:
        seen = set(p.served_order.tolist())
        for c in range(p.parent.size):
            if p.parent[c] == NOT_ARRIVED:
                assert c not in seen


def test_csv_export():
    p = simulate_path(QueueConfig(n=50, alpha=0.5), 20, np.random.default_rng(4))
    lines = p.to_csv().splitlines()
    assert lines[0] == "k,A,N,Q,served_index,parent_index"
    assert lines[1] == f"0,0,{p.unreflected[0]},{p.queue[0]},-1,-1"
    assert len(lines) == p.steps + 2


# ------------------------------------------------------------ properties

@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(0, 60),
    alpha=st.sampled_from([0.0, 0.25, 1.0]),
    q=st.floats(0.0, 3.0),
    seed=st.integers(0, 2**32 - 1),
    method=st.sampled_from(["timeline", "step"]),
)
def test_path_properties(n, alpha, q, seed, method):
    cfg = QueueConfig(n=n, alpha=alpha, q=q, dist=DEFAULT_HYPEREXP)
    p = simulate_path(cfg, 3 * n + 5, np.random.default_rng(seed), method=method, track_upper=True)
    assert np.array_equal(p.queue, reflect(p.unreflected))
    assert np.all(p.unreflected <= p.unreflected_upper)
    assert np.all(p.queue >= 0) and np.all(p.in_system >= 0)
    assert sorted(p.served_order.tolist()) == sorted(set(p.served_order.tolist()))
    assert p.steps <= n + cfg.split_initial()[1]


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 80), seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.0, 1.0))
def test_busy_period_bounds(n, seed, alpha):
    cfg = QueueConfig(n=n, alpha=alpha)
    rec = simulate_first_busy_period_fast(cfg, np.random.default_rng(seed))
    assert rec.initial_queue <= rec.customers_served <= n + cfg.split_initial()[1]
    assert rec.scaled_value == pytest.approx(rec.customers_served / n ** (2 / 3))


def test_busy_period_mc_is_reproducible_and_thread_independent():
    cfg = QueueConfig(n=300, alpha=0.5)
    a = busy_period_mc(cfg, 64, 7, threads=1)
    b = busy_period_mc(cfg, 64, 7, threads=3)
    c = busy_period_mc(cfg, 32, 7, threads=2)
    assert np.array_equal(a, b)
    assert np.array_equal(a[:32], c)
