# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_fallback.py`` holds the numpy twins; both must agree bit for bit."""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, INFINITY
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal, random_standard_uniform

cnp.import_array()

IMPLEMENTATION = "compiled"

cdef const char *_CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_bitgen_ptr(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE_NAME):
        raise ValueError("generator does not expose a bit generator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE_NAME)


# ---------------------------------------------------------------- busy period

cdef inline void _sift_down(Py_ssize_t *heap, const double *key, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t item = heap[pos]
    cdef double kv = key[item]
    cdef Py_ssize_t child
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and key[heap[child + 1]] < key[heap[child]]:
            child += 1
        if key[heap[child]] < kv:
            heap[pos] = heap[child]
            pos = child
        else:
            break
    heap[pos] = item


cdef inline Py_ssize_t _pop(Py_ssize_t *heap, const double *key, Py_ssize_t *size) noexcept nogil:
    cdef Py_ssize_t top = heap[0]
    size[0] -= 1
    if size[0] > 0:
        heap[0] = heap[size[0]]
        _sift_down(heap, key, size[0], 0)
    return top


def first_busy_period(const double[::1] clocks, const double[::1] durations,
                      Py_ssize_t n_init, const double[::1] extra_durations):
    """Number of customers served before the queue first empties.

    ``clocks`` and ``durations`` describe the pool. The ``n_init`` earliest
    clocks are in the queue at time zero (the remaining clocks are measured
    from the latest of them), followed by the extra customers. Arrivals are
    pulled lazily from a binary heap so the cost is O(n + BP log n).
    """
    cdef Py_ssize_t n = clocks.shape[0]
    cdef Py_ssize_t m = extra_durations.shape[0]
    if durations.shape[0] != n:
        raise ValueError("clocks and durations differ in length")
    if n_init < 0 or n_init > n:
        raise ValueError("n_init out of range")
    if n_init + m == 0:
        return 0
    cdef Py_ssize_t *heap = <Py_ssize_t *> malloc((n + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *fifo = <Py_ssize_t *> malloc((n + m + 1) * sizeof(Py_ssize_t))
    if heap == NULL or fifo == NULL:
        free(heap)
        free(fifo)
        raise MemoryError()
    cdef const double *key = &clocks[0] if n > 0 else NULL
    cdef Py_ssize_t size = n, i, head = 0, tail = 0, c, served = 0, nxt
    cdef double t0 = 0.0, work = 0.0
    with nogil:
        for i in range(n):
            heap[i] = i
        i = n // 2 - 1
        while i >= 0:
            _sift_down(heap, key, size, i)
            i -= 1
        for i in range(n_init):
            c = _pop(heap, key, &size)
            t0 = key[c]
            fifo[tail] = c
            tail += 1
        for i in range(m):
            fifo[tail] = n + i
            tail += 1
        while head < tail:
            c = fifo[head]
            head += 1
            if c < n:
                work = work + durations[c]
            else:
                work = work + extra_durations[c - n]
            served += 1
            while size > 0 and key[heap[0]] - t0 <= work:
                nxt = _pop(heap, key, &size)
                fifo[tail] = nxt
                tail += 1
    free(heap)
    free(fifo)
    return served


# ---------------------------------------------------------------- diffusion

cdef double BRIDGE_CUTOFF = 40.0  # crossing probability below e^-40 is treated as zero


cdef void _hit_one(double q, double beta, double gamma, double dt, double sdt, double s2dt,
                   Py_ssize_t max_steps, bitgen_t *bg, bitgen_t *bgf, bitgen_t *bgc,
                   double *out) noexcept nogil:
    cdef double w = q, wprev, wc_prev = q, t, z, u, arg
    cdef double fine_n = INFINITY, coarse_n = INFINITY, fine_b = INFINITY, coarse_b = INFINITY
    cdef bint bridge = bgf != NULL
    cdef Py_ssize_t k
    for k in range(1, max_steps + 1):
        t = <double> (k - 1) * dt
        z = random_standard_normal(bg)
        wprev = w
        w = wprev + ((beta - gamma * (2.0 * t + dt)) * dt + sdt * z)
        if bridge and fine_b == INFINITY:
            if w <= 0.0:
                fine_b = (<double> k - 0.5) * dt
            elif wprev > 0.0:
                arg = 2.0 * wprev * w / s2dt
                # a uniform is consumed only when the crossing probability is not negligible
                if arg <= BRIDGE_CUTOFF:
                    u = random_standard_uniform(bgf)
                    if u < exp(-arg):
                        fine_b = (<double> k - 0.5) * dt
        if fine_n == INFINITY and w <= 0.0:
            fine_n = <double> k * dt
        if k % 2 == 0:
            if bridge and coarse_b == INFINITY:
                if w <= 0.0:
                    coarse_b = <double> (k - 1) * dt
                elif wc_prev > 0.0:
                    arg = 2.0 * wc_prev * w / (2.0 * s2dt)
                    if arg <= BRIDGE_CUTOFF:
                        u = random_standard_uniform(bgc)
                        if u < exp(-arg):
                            coarse_b = <double> (k - 1) * dt
            if w <= 0.0:
                coarse_n = <double> k * dt
                break
            wc_prev = w
    out[0] = fine_n
    out[1] = coarse_n
    out[2] = fine_b
    out[3] = coarse_b


def hitting_times(double q, double beta, double gamma, double dt, double sdt, double s2dt,
                  Py_ssize_t max_steps, list normal_gens, list fine_gens=None, list coarse_gens=None):
    """Grid hitting times of zero for independent paths of the quadratic-drift diffusion.

    One row per generator in ``normal_gens``. Columns: naive rule on the grid
    ``dt``, naive rule on the grid ``2 dt`` built from the same path, and the
    bridge-corrected versions of both (NaN unless bridge streams are given).
    Unhit paths report +inf.
    """
    cdef Py_ssize_t reps = len(normal_gens), r
    cdef bint bridge = fine_gens is not None
    if bridge and (coarse_gens is None or len(fine_gens) != reps or len(coarse_gens) != reps):
        raise ValueError("bridge streams must match the normal streams")
    out = np.full((reps, 4), np.nan)
    cdef double[:, ::1] ov = out
    cdef bitgen_t **bgs = <bitgen_t **> malloc(3 * (reps + 1) * sizeof(bitgen_t *))
    if bgs == NULL:
        raise MemoryError()
    try:
        for r in range(reps):
            bgs[3 * r] = _bitgen_ptr(normal_gens[r])
            if bridge:
                bgs[3 * r + 1] = _bitgen_ptr(fine_gens[r])
                bgs[3 * r + 2] = _bitgen_ptr(coarse_gens[r])
            else:
                bgs[3 * r + 1] = NULL
                bgs[3 * r + 2] = NULL
        with nogil:
            for r in range(reps):
                _hit_one(q, beta, gamma, dt, sdt, s2dt, max_steps,
                         bgs[3 * r], bgs[3 * r + 1], bgs[3 * r + 2], &ov[r, 0])
    finally:
        free(bgs)
    if not bridge:
        out[:, 2:] = np.nan
    return out
