"""Pure numpy versions of the compiled kernels, used when the extension is unavailable."""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"

_CHUNK = 4096  # must stay even so that coarse grid points line up across chunks


def first_busy_period(clocks, durations, n_init, extra_durations):
    clocks = np.asarray(clocks, dtype=float)
    durations = np.asarray(durations, dtype=float)
    extra = np.asarray(extra_durations, dtype=float)
    n = clocks.shape[0]
    if durations.shape[0] != n:
        raise ValueError("clocks and durations differ in length")
    if n_init < 0 or n_init > n:
        raise ValueError("n_init out of range")
    start = n_init + extra.shape[0]
    if start == 0:
        return 0
    order = np.argsort(clocks, kind="stable")
    t0 = clocks[order[n_init - 1]] if n_init > 0 else 0.0
    rel = clocks[order[n_init:]] - t0
    served_durations = np.concatenate((durations[order[:n_init]], extra, durations[order[n_init:]]))
    work = np.cumsum(served_durations)
    k = np.arange(1, work.shape[0] + 1)
    queue = start + np.searchsorted(rel, work, side="right") - k
    empty = np.flatnonzero(queue <= 0)
    return int(empty[0] + 1) if empty.size else int(work.shape[0])


BRIDGE_CUTOFF = 40.0


def _bridge_hit(prev, cur, scale, gen):
    """Index of the first bridge crossing in a chunk, or None.

    Uniforms are drawn, in order, only where the crossing probability is not
    negligible, which is the consumption pattern of the compiled loop.
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        arg = 2.0 * prev * cur / scale
    need = (cur > 0.0) & (prev > 0.0) & (arg <= BRIDGE_CUTOFF)
    hit = cur <= 0.0
    idx = np.flatnonzero(need)
    if idx.size:
        u = gen.random(idx.size)
        hit[idx[u < np.exp(-arg[idx])]] = True
    first = np.flatnonzero(hit)
    if not first.size:
        return None
    # draws after the first hit are never used by the compiled loop either
    return int(first[0])


def _hit_one(q, beta, gamma, dt, sdt, s2dt, max_steps, gen, genf, genc):
    bridge = genf is not None
    fine_n = coarse_n = fine_b = coarse_b = np.inf
    w_last = q
    wc_last = q
    k0 = 0
    while k0 < max_steps:
        m = min(_CHUNK, max_steps - k0)
        z = gen.standard_normal(m)
        t = np.arange(k0, k0 + m, dtype=float) * dt
        inc = (beta - gamma * (2.0 * t + dt)) * dt + sdt * z
        w = np.cumsum(np.concatenate(([w_last], inc)))
        wprev, w = w[:-1], w[1:]
        kk = np.arange(k0 + 1, k0 + m + 1)
        if bridge and fine_b == np.inf:
            j = _bridge_hit(wprev, w, s2dt, genf)
            if j is not None:
                fine_b = (float(kk[j]) - 0.5) * dt
        if fine_n == np.inf:
            idx = np.flatnonzero(w <= 0.0)
            if idx.size:
                fine_n = float(kk[idx[0]]) * dt
        # even steps sit at odd offsets because k0 is even
        wc = w[1::2]
        kc = kk[1::2]
        if wc.size:
            wcprev = np.concatenate(([wc_last], wc[:-1]))
            stop = np.flatnonzero(wc <= 0.0)
            if bridge and coarse_b == np.inf:
                # the compiled loop stops at the first nonpositive even step
                end = stop[0] + 1 if stop.size else wc.size
                j = _bridge_hit(wcprev[:end], wc[:end], 2.0 * s2dt, genc)
                if j is not None:
                    coarse_b = float(kc[j] - 1) * dt
            if stop.size:
                coarse_n = float(kc[stop[0]]) * dt
                break
            wc_last = wc[-1]
        w_last = w[-1]
        k0 += m
    return fine_n, coarse_n, fine_b, coarse_b


def hitting_times(q, beta, gamma, dt, sdt, s2dt, max_steps, normal_gens, fine_gens=None, coarse_gens=None):
    reps = len(normal_gens)
    bridge = fine_gens is not None
    if bridge and (coarse_gens is None or len(fine_gens) != reps or len(coarse_gens) != reps):
        raise ValueError("bridge streams must match the normal streams")
    out = np.full((reps, 4), np.nan)
    for r in range(reps):
        res = _hit_one(
            q, beta, gamma, dt, sdt, s2dt, max_steps, normal_gens[r],
            fine_gens[r] if bridge else None, coarse_gens[r] if bridge else None,
        )
        out[r] = res
    if not bridge:
        out[:, 2:] = np.nan
    return out
