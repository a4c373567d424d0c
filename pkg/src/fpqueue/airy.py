"""Airy functions Ai, Bi and their derivatives for real arguments.

For |x| <= 10 values come from a Taylor re-expansion of y'' = x y about the
nearest node of a 0.25-spaced table. The table is filled once at import by
stepping the same recurrence from the exact values at 0, except that Ai on
x > 0 is stepped backwards from x = 12 where the asymptotic series is
accurate (stepping a decaying solution forwards is unstable). Beyond |x| = 10
the standard asymptotic expansions are used.

``airy_scaled`` returns Ai e^z, Ai' e^z, Bi e^-z, Bi' e^-z with
z = (2/3) x^(3/2) for x > 0 (no scaling for x <= 0), so that ratios of Airy
functions can be formed without overflow.
"""

from __future__ import annotations

import math

import numpy as np

DOMAIN = (-1.0e6, 100.0)  # unscaled functions; Bi(100) is near the float limit
SCALED_DOMAIN = (-1.0e7, 1.0e6)

_H = 0.25
_TABLE_LO, _TABLE_HI = -10.0, 10.0
_N_TAYLOR = 44
_N_ASYMP = 40

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)
BI0 = 3.0 ** (-1.0 / 6.0) / math.gamma(2.0 / 3.0)
BIP0 = 3.0 ** (1.0 / 6.0) / math.gamma(1.0 / 3.0)

_SQRT_PI = math.sqrt(math.pi)


def _asymptotic_coeffs(count: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.empty(count)
    v = np.empty(count)
    u[0] = v[0] = 1.0
    for k in range(1, count):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v[k] = -(6 * k + 1) / (6 * k - 1) * u[k]
    return u, v


_U, _V = _asymptotic_coeffs(_N_ASYMP)


def _series(coef: np.ndarray, inv_zeta: np.ndarray, sign: float) -> np.ndarray:
    """Sum_k sign^k coef_k zeta^-k, stopped at the smallest term for each argument."""
    total = np.zeros_like(inv_zeta)
    term_prev = np.full_like(inv_zeta, np.inf)
    active = np.ones(inv_zeta.shape, dtype=bool)
    power = np.ones_like(inv_zeta)
    for k in range(coef.size):
        term = coef[k] * power * (sign**k)
        mag = np.abs(term)
        active &= mag < term_prev
        total = np.where(active, total + term, total)
        term_prev = np.where(active, mag, term_prev)
        power = power * inv_zeta
        if not active.any():
            break
    return total


def _asymptotic_positive(x: np.ndarray) -> tuple[np.ndarray, ...]:
    """Scaled values for large positive x."""
    zeta = (2.0 / 3.0) * x**1.5
    iz = 1.0 / zeta
    q = x**0.25
    ai = _series(_U, iz, -1.0) / (2.0 * _SQRT_PI * q)
    aip = -_series(_V, iz, -1.0) * q / (2.0 * _SQRT_PI)
    bi = _series(_U, iz, 1.0) / (_SQRT_PI * q)
    bip = _series(_V, iz, 1.0) * q / _SQRT_PI
    return ai, aip, bi, bip


def _asymptotic_negative(x: np.ndarray) -> tuple[np.ndarray, ...]:
    """Unscaled values for large negative x."""
    y = -x
    zeta = (2.0 / 3.0) * y**1.5
    iz = 1.0 / zeta
    iz2 = iz * iz
    u_even, u_odd = _U[0::2], _U[1::2]
    v_even, v_odd = _V[0::2], _V[1::2]
    p = _series(u_even, iz2, -1.0)
    qq = _series(u_odd, iz2, -1.0) * iz
    r = _series(v_even, iz2, -1.0)
    s = _series(v_odd, iz2, -1.0) * iz
    phase = zeta - math.pi / 4.0
    cs, sn = np.cos(phase), np.sin(phase)
    amp = 1.0 / (_SQRT_PI * y**0.25)
    damp = y**0.25 / _SQRT_PI
    ai = amp * (cs * p + sn * qq)
    bi = amp * (-sn * p + cs * qq)
    aip = damp * (sn * r - cs * s)
    bip = damp * (cs * r + sn * s)
    return ai, aip, bi, bip


def _taylor(x0, y0, yp0, h, terms: int = _N_TAYLOR):
    """Value and derivative at x0 + h of the solution of y'' = x y through (y0, yp0)."""
    x0 = np.asarray(x0, dtype=float)
    h = np.asarray(h, dtype=float)
    a_km1 = np.zeros(np.broadcast(x0, h, y0).shape)  # a_{k-1}
    a_k = np.asarray(y0, dtype=float) + a_km1  # a_0
    a_kp1 = np.asarray(yp0, dtype=float) + a_km1  # a_1
    val = a_k + a_kp1 * h
    der = a_kp1.copy()
    hp = h.copy()  # h^(k+1) when adding a_{k+2}
    for k in range(0, terms):
        a_kp2 = (x0 * a_k + a_km1) / ((k + 2.0) * (k + 1.0))
        der = der + (k + 2.0) * a_kp2 * hp
        hp = hp * h
        val = val + a_kp2 * hp
        a_km1, a_k, a_kp1 = a_k, a_kp1, a_kp2
    return val, der


def _build_table():
    nodes = np.arange(int(round((_TABLE_HI - _TABLE_LO) / _H)) + 1) * _H + _TABLE_LO
    i0 = int(round(-_TABLE_LO / _H))
    ai = np.empty_like(nodes)
    aip = np.empty_like(nodes)
    bi = np.empty_like(nodes)
    bip = np.empty_like(nodes)
    ai[i0], aip[i0], bi[i0], bip[i0] = AI0, AIP0, BI0, BIP0
    for j in range(i0, 0, -1):
        ai[j - 1], aip[j - 1] = _taylor(nodes[j], ai[j], aip[j], -_H)
        bi[j - 1], bip[j - 1] = _taylor(nodes[j], bi[j], bip[j], -_H)
    for j in range(i0, nodes.size - 1):
        bi[j + 1], bip[j + 1] = _taylor(nodes[j], bi[j], bip[j], _H)
    # Ai for x > 0: start beyond the table and step towards the origin
    start = 12.0
    sa, sap, _, _ = _asymptotic_positive(np.array([start]))
    z = (2.0 / 3.0) * start**1.5
    cur_x, cur, curp = start, sa[0] * math.exp(-z), sap[0] * math.exp(-z)
    while cur_x > _TABLE_HI + 1e-12:
        cur, curp = _taylor(cur_x, cur, curp, -_H)
        cur_x -= _H
    for j in range(nodes.size - 1, i0, -1):
        ai[j], aip[j] = cur, curp
        cur, curp = _taylor(nodes[j], cur, curp, -_H)
    return nodes, ai, aip, bi, bip


_NODES, _TAI, _TAIP, _TBI, _TBIP = _build_table()


def _table_eval(x: np.ndarray) -> tuple[np.ndarray, ...]:
    j = np.clip(np.rint((x - _TABLE_LO) / _H).astype(np.int64), 0, _NODES.size - 1)
    x0 = _NODES[j]
    h = x - x0
    ai, aip = _taylor(x0, _TAI[j], _TAIP[j], h)
    bi, bip = _taylor(x0, _TBI[j], _TBIP[j], h)
    return ai, aip, bi, bip


def airy_scaled(x):
    """(Ai e^z, Ai' e^z, Bi e^-z, Bi' e^-z) with z = (2/3) max(x, 0)^(3/2)."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if not np.all(np.isfinite(xa)) or xa.min(initial=0.0) < SCALED_DOMAIN[0] or xa.max(initial=0.0) > SCALED_DOMAIN[1]:
        raise ValueError(f"argument outside {SCALED_DOMAIN}")
    out = [np.empty_like(xa) for _ in range(4)]
    mid = np.abs(xa) <= _TABLE_HI
    hi = xa > _TABLE_HI
    lo = xa < _TABLE_LO
    if mid.any():
        vals = _table_eval(xa[mid])
        xm = xa[mid]
        z = np.where(xm > 0, (2.0 / 3.0) * np.maximum(xm, 0.0) ** 1.5, 0.0)
        ez = np.exp(z)
        emz = np.exp(-z)
        for o, v, f in zip(out, vals, (ez, ez, emz, emz)):
            o[mid] = v * f
    if hi.any():
        for o, v in zip(out, _asymptotic_positive(xa[hi])):
            o[hi] = v
    if lo.any():
        for o, v in zip(out, _asymptotic_negative(xa[lo])):
            o[lo] = v
    if scalar:
        return tuple(float(o[0]) for o in out)
    return tuple(out)


def _check_domain(xa: np.ndarray):
    if not np.all(np.isfinite(xa)) or xa.min(initial=0.0) < DOMAIN[0] or xa.max(initial=0.0) > DOMAIN[1]:
        raise ValueError(f"argument outside {DOMAIN}")


def airy(x):
    """(Ai, Ai', Bi, Bi') at x."""
    xa = np.asarray(x, dtype=float)
    _check_domain(np.atleast_1d(xa))
    ai, aip, bi, bip = (np.atleast_1d(v) for v in airy_scaled(xa))
    xf = np.atleast_1d(xa)
    z = np.where(xf > 0, (2.0 / 3.0) * np.maximum(xf, 0.0) ** 1.5, 0.0)
    ez, emz = np.exp(z), np.exp(-z)
    res = (ai * emz, aip * emz, bi * ez, bip * ez)
    if xa.ndim == 0:
        return tuple(float(v[0]) for v in res)
    return res


def airy_ai(x):
    return airy(x)[0]


def airy_bi(x):
    return airy(x)[2]
