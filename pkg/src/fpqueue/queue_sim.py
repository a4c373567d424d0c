"""Embedded queue-length chain of the finite-pool queue.

Customers ``0..n-1`` form the pool. Customer ``i`` has service requirement
``S_i`` and an exponential arrival clock with rate ``lam * S_i**alpha``. The
server works at speed ``n / (1 + beta n^(-1/3))`` in heavy-traffic mode, so a
service lasts ``S_i (1 + beta n^(-1/3)) / n``.

At time zero the first ``Q(0)`` customers of the pool, in arrival order, are
already waiting; the clocks of the others are measured from the latest of
those arrivals. If ``Q(0)`` exceeds the pool, or with ``initial_law="iid"``,
extra customers with ids ``n, n+1, ...`` and i.i.d. requirements are added.

Two simulators produce the same law. ``method="step"`` follows the chain one
service at a time with fresh memoryless clocks and is the reference. The
default ``method="timeline"`` sorts all clocks once and reads everything off
the resulting timeline.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .distributions import Exponential, ServiceDistribution, parse
from .rng import run_blocks, substreams

NO_PARENT = -1  # root of a tree: initial customer or picked after an idle period
NOT_ARRIVED = -2  # never joined within the simulated horizon


@dataclass(frozen=True)
class QueueConfig:
    n: int
    alpha: float = 0.0
    beta: float = 1.0
    q: float = 1.0
    dist: ServiceDistribution = field(default_factory=lambda: Exponential(1.0))
    lambda_mode: object = "analytic"  # "analytic" or a positive float
    time_scale: str = "heavy"  # "heavy": durations S c / n; "unscaled": durations S
    initial_queue: Optional[int] = None
    initial_law: str = "size_biased"  # or "iid"

    def __post_init__(self):
        object.__setattr__(self, "dist", parse(self.dist))
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("n must be a nonnegative integer")
        object.__setattr__(self, "n", int(self.n))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.q >= 0:
            raise ValueError("q must be nonnegative")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.lambda_mode != "analytic":
            lam = float(self.lambda_mode)
            if not (lam > 0 and math.isfinite(lam)):
                raise ValueError("fixed lambda must be positive")
            object.__setattr__(self, "lambda_mode", lam)
        if self.time_scale not in ("heavy", "unscaled"):
            raise ValueError("time_scale must be 'heavy' or 'unscaled'")
        if self.initial_law not in ("size_biased", "iid"):
            raise ValueError("initial_law must be 'size_biased' or 'iid'")
        if self.initial_queue is not None and self.initial_queue < 0:
            raise ValueError("initial_queue must be nonnegative")

    @classmethod
    def fixed_rate(cls, n: int, alpha: float, lam: float = 0.01, dist="exp:1", initial_queue: int = 1,
                   **kw) -> "QueueConfig":
        """Unscaled queue with a fixed arrival rate and a small initial queue."""
        return cls(n=n, alpha=alpha, beta=0.0, q=float(initial_queue), dist=dist, lambda_mode=lam,
                   time_scale="unscaled", initial_queue=initial_queue, **kw)

    @property
    def lam(self) -> float:
        if self.lambda_mode == "analytic":
            return 1.0 / self.dist.moment(1.0 + self.alpha)
        return float(self.lambda_mode)

    @property
    def speed_factor(self) -> float:
        if self.time_scale == "unscaled":
            return 1.0
        return 1.0 + self.beta * _n_scale(self.n) ** (-1.0 / 3.0)

    @property
    def duration_divisor(self) -> float:
        return 1.0 if self.time_scale == "unscaled" else float(_n_scale(self.n))

    def initial_count(self) -> int:
        if self.initial_queue is not None:
            return int(self.initial_queue)
        if self.q == 0:
            return 0
        if self.time_scale == "unscaled":
            return max(1, math.floor(self.q))
        return max(1, math.floor(self.q * self.n ** (1.0 / 3.0)))

    def split_initial(self) -> tuple[int, int]:
        """(initial customers taken from the pool, extra i.i.d. customers)."""
        i = self.initial_count()
        if self.initial_law == "iid":
            return 0, i
        from_pool = min(i, self.n)
        return from_pool, i - from_pool

    def with_(self, **kw) -> "QueueConfig":
        return replace(self, **kw)


def _n_scale(n: int) -> int:
    # heavy-traffic scaling needs n >= 1; an empty pool is scaled as n = 1
    return max(int(n), 1)


@dataclass
class Population:
    services: np.ndarray
    alpha_weights: np.ndarray
    lam: float
    speed_factor: float
    scaled_services: np.ndarray
    extra_services: np.ndarray
    extra_scaled: np.ndarray
    n_initial_pool: int
    alpha: float

    @property
    def n(self) -> int:
        return int(self.services.shape[0])

    @property
    def n_extra(self) -> int:
        return int(self.extra_services.shape[0])

    @property
    def rates(self) -> np.ndarray:
        return self.lam * self.alpha_weights

    def duration(self, cid: int) -> float:
        return float(self.scaled_services[cid] if cid < self.n else self.extra_scaled[cid - self.n])

    def requirement(self, cid: int) -> float:
        return float(self.services[cid] if cid < self.n else self.extra_services[cid - self.n])

    def draw_clocks(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_exponential(self.n) / self.rates


def build_population(config: QueueConfig, rng: np.random.Generator) -> Population:
    services = config.dist.sample(rng, config.n)
    from_pool, extra = config.split_initial()
    extra_services = config.dist.sample(rng, extra)
    c = config.speed_factor
    div = config.duration_divisor
    weights = services**config.alpha if config.alpha != 0 else np.ones_like(services)
    return Population(
        services=services,
        alpha_weights=weights,
        lam=config.lam,
        speed_factor=c,
        scaled_services=services * c / div,
        extra_services=extra_services,
        extra_scaled=extra_services * c / div,
        n_initial_pool=from_pool,
        alpha=config.alpha,
    )


@dataclass
class BusyPeriodRecord:
    customers_served: int
    initial_queue: int
    scaled_value: float


@dataclass
class EmbeddedPath:
    """Trajectory of the embedded chain.

    ``queue``, ``unreflected`` and ``in_system`` have one entry per service
    completion plus the initial state; ``arrivals`` and ``served_order`` have
    one entry per service. ``queue`` follows Q(k) = max(Q(k-1) + A(k) - 1, 0),
    which agrees with the physical number in system (``in_system``) up to the
    end of the first busy period. ``parent`` is indexed by customer id.
    """

    n: int
    initial_queue: int
    arrivals: np.ndarray
    unreflected: np.ndarray
    queue: np.ndarray
    in_system: np.ndarray
    served_order: np.ndarray
    parent: np.ndarray
    nu_size: np.ndarray
    busy_period_ends: np.ndarray = field(default=None)
    arrivals_upper: Optional[np.ndarray] = None
    unreflected_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.busy_period_ends is None:
            self.busy_period_ends = np.flatnonzero(self.queue[1:] == 0) + 1

    @property
    def steps(self) -> int:
        return int(self.arrivals.shape[0])

    def first_busy_period(self) -> Optional[int]:
        return int(self.busy_period_ends[0]) if self.busy_period_ends.size else None

    def served_parents(self) -> np.ndarray:
        return self.parent[self.served_order] if self.steps else np.zeros(0, dtype=np.int64)

    def to_csv(self) -> str:
        lines = ["k,A,N,Q,served_index,parent_index"]
        lines.append(f"0,0,{self.unreflected[0]},{self.queue[0]},-1,-1")
        par = self.served_parents()
        for k in range(1, self.steps + 1):
            lines.append(
                f"{k},{self.arrivals[k - 1]},{self.unreflected[k]},{self.queue[k]},"
                f"{self.served_order[k - 1]},{par[k - 1]}"
            )
        return "\n".join(lines) + "\n"


def _embedded_recursions(arrivals: np.ndarray, q0: int) -> tuple[np.ndarray, np.ndarray]:
    n_path = np.concatenate(([q0], q0 + np.cumsum(arrivals - 1))).astype(np.int64)
    q_path = np.empty_like(n_path)
    q_path[0] = q0
    cur = q0
    for k, a in enumerate(arrivals, start=1):
        cur = max(cur + int(a) - 1, 0)
        q_path[k] = cur
    return n_path, q_path


# ------------------------------------------------------------------ step chain

def idle_pick(pool: np.ndarray, weights: np.ndarray, rng: np.random.Generator) -> int:
    """Position in ``pool`` chosen with probability proportional to ``weights[pool]``."""
    if pool.size == 0:
        raise IndexError("pool is empty")
    cum = np.cumsum(weights[pool])
    pos = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(pos, pool.size - 1)


class ChainState:
    """Mutable state of the step-by-step chain."""

    def __init__(self, pop: Population, rng: np.random.Generator, track_upper: bool = False):
        self.pop = pop
        self.track_upper = track_upper
        n, m = pop.n, pop.n_extra
        self.pool = np.arange(n)
        self.queue: deque[int] = deque()
        self.served: list[int] = []
        self.parent = np.full(n + m, NOT_ARRIVED, dtype=np.int64)
        for _ in range(pop.n_initial_pool):
            self.queue.append(self.idle_pick(rng))
        for j in range(m):
            self.queue.append(n + j)
        for cid in self.queue:
            self.parent[cid] = NO_PARENT

    def idle_pick(self, rng: np.random.Generator) -> int:
        pos = idle_pick(self.pool, self.pop.alpha_weights, rng)
        cid = int(self.pool[pos])
        self.pool = np.delete(self.pool, pos)
        return cid

    def total(self) -> int:
        return len(self.served) + len(self.queue) + int(self.pool.size)

    def step(self, rng: np.random.Generator) -> tuple[int, int, int]:
        """Serve the head of the queue. Returns (customer, A, A_upper)."""
        if not self.queue:
            raise IndexError("queue is empty; call idle_pick first")
        pop = self.pop
        cid = self.queue.popleft()
        d = pop.duration(cid)
        self.served.append(cid)
        a_upper = 0
        if self.track_upper:
            waiting = np.fromiter((j for j in self.queue if j < pop.n), dtype=np.int64)
            if waiting.size:
                fresh = rng.standard_exponential(waiting.size) / pop.rates[waiting]
                a_upper = int(np.count_nonzero(fresh <= d))
        if self.pool.size:
            clocks = rng.standard_exponential(self.pool.size) / pop.rates[self.pool]
            hit = clocks <= d
            joiners = self.pool[hit][np.argsort(clocks[hit], kind="stable")]
            self.pool = self.pool[~hit]
        else:
            joiners = self.pool[:0]
        self.queue.extend(int(j) for j in joiners)
        self.parent[joiners] = cid
        a = int(joiners.size)
        return cid, a, a + a_upper


def step_embedded(state: ChainState, rng: np.random.Generator) -> int:
    """One service of the chain; returns the number of arrivals during it."""
    return state.step(rng)[1]


def _simulate_step(config: QueueConfig, pop: Population, horizon: int, rng, track_upper: bool) -> EmbeddedPath:
    state = ChainState(pop, rng, track_upper=track_upper)
    q0 = len(state.queue)
    arrivals, arrivals_up, served, in_sys, nu = [], [], [], [q0], []
    while len(served) < horizon:
        if not state.queue:
            if state.pool.size == 0:
                break
            cid = state.idle_pick(rng)
            state.parent[cid] = NO_PARENT
            state.queue.append(cid)
        nu.append(len(state.served) + len(state.queue))
        cid, a, au = state.step(rng)
        served.append(cid)
        arrivals.append(a)
        arrivals_up.append(au)
        in_sys.append(len(state.queue))
    return _assemble(config, pop, q0, np.array(arrivals, dtype=np.int64), np.array(served, dtype=np.int64),
                     state.parent, np.array(in_sys, dtype=np.int64), np.array(nu, dtype=np.int64),
                     np.array(arrivals_up, dtype=np.int64) if track_upper else None)


def _assemble(config, pop, q0, arrivals, served, parent, in_sys, nu, arrivals_up) -> EmbeddedPath:
    n_path, q_path = _embedded_recursions(arrivals, q0)
    path = EmbeddedPath(
        n=pop.n, initial_queue=q0, arrivals=arrivals, unreflected=n_path, queue=q_path,
        in_system=in_sys, served_order=served, parent=parent, nu_size=nu,
    )
    if arrivals_up is not None:
        path.arrivals_upper = arrivals_up
        path.unreflected_upper = np.concatenate(([q0], q0 + np.cumsum(arrivals_up - 1))).astype(np.int64)
    return path


# ------------------------------------------------------------------ timeline

def _simulate_timeline(config: QueueConfig, pop: Population, horizon: int, rng, track_upper: bool) -> EmbeddedPath:
    n, m = pop.n, pop.n_extra
    i_p = pop.n_initial_pool
    q0 = i_p + m
    clocks = pop.draw_clocks(rng)
    order = np.argsort(clocks, kind="stable")
    t0 = clocks[order[i_p - 1]] if i_p > 0 else 0.0
    rest = order[i_p:]
    arr_rest = clocks[rest] - t0
    ids = np.concatenate((order[:i_p], np.arange(n, n + m), rest)).astype(np.int64)
    arr = np.concatenate((np.zeros(q0), arr_rest))
    dur = np.concatenate((pop.scaled_services[order[:i_p]], pop.extra_scaled, pop.scaled_services[rest]))
    steps = min(horizon, ids.size)
    ids, arr, dur = ids[:steps], arr[:steps], dur[:steps]
    total = np.cumsum(dur)
    before = np.concatenate(([0.0], total[:-1]))
    end = total + np.maximum.accumulate(arr - before) if steps else total
    end_prev = np.concatenate(([0.0], end[:-1]))
    start = np.maximum(arr, end_prev)

    n_arr_end = np.searchsorted(arr_rest, end, side="right")
    n_arr_start = np.searchsorted(arr_rest, start, side="right")
    arrivals = (n_arr_end - n_arr_start).astype(np.int64)
    k = np.arange(1, steps + 1)
    in_sys = np.concatenate(([q0], q0 + n_arr_end - k)).astype(np.int64)
    nu = q0 + n_arr_start

    parent = np.full(n + m, NOT_ARRIVED, dtype=np.int64)
    parent[ids[:q0]] = NO_PARENT
    # every arrival up to the end of the horizon gets a parent
    joined = rest[: int(n_arr_end[-1])] if steps else rest[:0]
    t_join = clocks[joined] - t0
    pos = np.searchsorted(end, t_join, side="left")
    during = (pos < steps) & (start[np.minimum(pos, max(steps - 1, 0))] < t_join)
    parent[joined] = np.where(during, ids[np.minimum(pos, max(steps - 1, 0))], NO_PARENT)

    arrivals_up = None
    if track_upper:
        waiting = nu - k  # behind customer k at the start of its service
        # positions k .. k+waiting-1 (0-based) are the waiting customers, in FIFO order
        rows = np.repeat(np.arange(steps), waiting)
        offs = np.arange(rows.size) - np.repeat(np.cumsum(waiting) - waiting, waiting)
        who_pos = rows + 1 + offs
        full_ids = np.concatenate((order[:i_p], np.arange(n, n + m), rest)).astype(np.int64)
        who = full_ids[who_pos]
        pool_origin = who < n
        rows, who = rows[pool_origin], who[pool_origin]
        p = -np.expm1(-pop.rates[who] * dur[rows])
        extra = np.bincount(rows[rng.random(rows.size) < p], minlength=steps)
        arrivals_up = arrivals + extra.astype(np.int64)
    return _assemble(config, pop, q0, arrivals, ids, parent, in_sys, nu, arrivals_up)


def simulate_path(config: QueueConfig, horizon_steps: int, rng: np.random.Generator, method: str = "timeline",
                  track_upper: bool = False, population: Optional[Population] = None) -> EmbeddedPath:
    """Run the chain for ``horizon_steps`` services or until nobody is left."""
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be at least 1")
    pop = population if population is not None else build_population(config, rng)
    if method == "timeline":
        return _simulate_timeline(config, pop, horizon_steps, rng, track_upper)
    if method == "step":
        return _simulate_step(config, pop, horizon_steps, rng, track_upper)
    raise ValueError(f"unknown method {method!r}")


def simulate_upper_bound(config: QueueConfig, horizon_steps: int, rng: np.random.Generator,
                         method: str = "timeline") -> tuple[EmbeddedPath, np.ndarray]:
    """Chain together with the coupled upper bound N^U (unserved customers may join again)."""
    path = simulate_path(config, horizon_steps, rng, method=method, track_upper=True)
    return path, path.unreflected_upper


# ------------------------------------------------------------------ busy periods

def _record(config: QueueConfig, bp: int) -> BusyPeriodRecord:
    return BusyPeriodRecord(int(bp), config.initial_count(), bp / _n_scale(config.n) ** (2.0 / 3.0))


def simulate_first_busy_period_fast(config: QueueConfig, rng: np.random.Generator) -> BusyPeriodRecord:
    """First busy period from one sorted set of arrival clocks (compiled kernel when built)."""
    if config.initial_count() < 1:
        raise ValueError("the first busy period needs Q(0) >= 1")
    pop = build_population(config, rng)
    clocks = pop.draw_clocks(rng)
    bp = kernels.first_busy_period(clocks, pop.scaled_services, pop.n_initial_pool, pop.extra_scaled)
    return _record(config, bp)


def simulate_first_busy_period_step(config: QueueConfig, rng: np.random.Generator) -> BusyPeriodRecord:
    """Reference version: the step chain stopped at its first empty queue."""
    if config.initial_count() < 1:
        raise ValueError("the first busy period needs Q(0) >= 1")
    pop = build_population(config, rng)
    state = ChainState(pop, rng)
    k = 0
    while state.queue:
        state.step(rng)
        k += 1
    return _record(config, k)


def busy_period_mc(config: QueueConfig, reps: int, seed: int, method: str = "fast",
                   threads: int | None = None, tag: str = "busy-period") -> np.ndarray:
    """Customers served in the first busy period, one entry per replication.

    Replication ``r`` always uses substream ``r`` so results do not depend on
    ``reps`` or ``threads`` beyond truncation.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    sim = {"fast": simulate_first_busy_period_fast, "step": simulate_first_busy_period_step}[method]

    def block(idx: range):
        return [sim(config, g).customers_served for g in substreams(seed, idx, tag)]

    return np.asarray(run_blocks(block, reps, threads), dtype=np.int64)


def criticality_diagnostic(services) -> float:
    """sum S_i^2 / sum S_i."""
    s = np.asarray(services, dtype=float)
    if s.size == 0:
        raise ValueError("empty service vector")
    return float(np.dot(s, s) / s.sum())
