"""Law of the first hitting time of zero of W(t) = q + beta t - gamma t^2 + sigma B(t).

The density is an integral over u of Airy-function ratios. It is evaluated
for the standardized process with gamma = 1/2 and mapped back by
t -> tau^2 t with tau = (2 gamma)^(-1/3).

The u-integral is split at 0. On u > 0 the integrand decays faster than any
exponential and is integrated with Gauss-Legendre panels up to a cutoff found
by scanning the log-integrand. On u < 0 the substitution u = -s^2 turns the
e^(tu) envelope into a Gaussian in s. The ratio is bounded by 1/pi there, so
the tail beyond s = S is at most e^(P(t) - t S^2) / (pi t). Panels are a
quarter of the asymptotic oscillation period wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .airy import airy_scaled
from .scaling import DiffusionParams


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (error estimate {estimate:.3g})")
        self.estimate = estimate


_GL_U = np.polynomial.legendre.leggauss(12)
_U_STEP = 0.5
_GL_T = np.polynomial.legendre.leggauss(12)
_LOG_TINY = -60.0  # integrand contributions below e^-60 are dropped
_CHUNK = 256


def _panel_nodes(edges: np.ndarray, rule) -> tuple[np.ndarray, np.ndarray]:
    x, w = rule
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


@dataclass
class _UGrid:
    u: np.ndarray
    w: np.ndarray  # quadrature weight including the Jacobian
    g: np.ndarray  # bounded part of the ratio
    z: np.ndarray  # z1 + z2, the log-scale removed from the ratio
    t_min: float
    t_max: float


class FptDensity:
    """Density, mean and CDF of the first hitting time of zero.

    Parameters follow :class:`DiffusionParams`; ``q`` must be positive.
    """

    def __init__(self, q: float, beta: float, gamma: float, sigma: float, tol: float = 1e-8):
        if not q > 0:
            raise ValueError("the density formula needs q > 0")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.q = float(q)
        self.beta = float(beta)
        self.gamma = float(gamma)
        self.sigma = float(sigma)
        self.tol = float(tol)
        self.tau = (2.0 * self.gamma) ** (-1.0 / 3.0)
        self.q_std = self.q / self.tau
        self.beta_std = self.beta * self.tau
        self.sigma2 = self.sigma**2
        self.a = self.q_std / self.sigma2
        self.c = (2.0 * self.sigma2) ** (1.0 / 3.0)
        self._grids: dict[int, _UGrid] = {}
        self._support: tuple[float, float] | None = None
        self._cdf: CubicHermiteSpline | None = None
        self._cdf_total: float | None = None

    @classmethod
    def from_params(cls, params: DiffusionParams, **kw) -> "FptDensity":
        return cls(params.q, params.beta, params.gamma, params.sigma, **kw)

    def standardized(self) -> "FptDensity":
        """Same law in the time unit where gamma = 1/2."""
        return FptDensity(self.q_std, self.beta_std, 0.5, self.sigma, tol=self.tol)

    # ---------------------------------------------------------- u-integral

    def _prefactor(self, s: np.ndarray) -> np.ndarray:
        b = self.beta_std
        return -((s - b) ** 3 + b**3) / (6.0 * self.sigma2) - b * self.a

    def _ratio(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x1 = self.c * u
        x2 = self.c * (u - self.a)
        ai1, _, bi1, _ = airy_scaled(x1)
        ai2, _, bi2, _ = airy_scaled(x2)
        z1 = np.where(x1 > 0, (2.0 / 3.0) * np.maximum(x1, 0.0) ** 1.5, 0.0)
        z2 = np.where(x2 > 0, (2.0 / 3.0) * np.maximum(x2, 0.0) ** 1.5, 0.0)
        g = (bi1 * ai2 - ai1 * bi2 * np.exp(2.0 * (z2 - z1))) / (math.pi * (bi1**2 + ai1**2 * np.exp(-4.0 * z1)))
        return g, z1 + z2

    def _build_grid(self, t_min: float, t_max: float) -> _UGrid:
        p_max = float(np.max(self._prefactor(np.linspace(t_min, t_max, 16))))

        # positive side: last u where the log-integrand P + t u - z1 - z2 is non-negligible
        u_peak = (t_max / (2.0 * self.c**1.5)) ** 2 + self.a
        scan = np.arange(0.0, 4.0 * u_peak + 16.0, 0.25)
        _, z = self._ratio(scan)
        live = np.flatnonzero(p_max + t_max * scan - z > _LOG_TINY)
        u_hi = scan[live[-1]] + 1.0 if live.size else 1.0
        if u_hi >= scan[-1]:
            raise QuadratureError("positive u cutoff not found", math.inf)
        pos_edges = np.linspace(0.0, u_hi, int(math.ceil(u_hi / _U_STEP)) + 1)
        u_pos, w_pos = _panel_nodes(pos_edges, _GL_U)

        # negative side in s = sqrt(-u); tail bound e^(P - t S^2) / (pi t) at t_min
        target = math.log(self.tol * 1e-4 * math.pi * t_min)
        s_max = math.sqrt(max(p_max - target, 1.0) / t_min)
        freq = self.c**1.5 * self.a
        width = min(0.5, 0.5 * math.pi / freq)
        n_pan = int(math.ceil(s_max / width))
        neg_edges = np.linspace(0.0, n_pan * width, n_pan + 1)
        s_nodes, s_w = _panel_nodes(neg_edges, _GL_U)
        u_neg = -(s_nodes**2)
        w_neg = 2.0 * s_nodes * s_w

        u_all = np.concatenate((u_neg, u_pos))
        w_all = np.concatenate((w_neg, w_pos))
        g, z = self._ratio(u_all)
        return _UGrid(u_all, w_all, g, z, t_min, t_max)

    def _grid_for_block(self, k: int) -> _UGrid:
        gr = self._grids.get(k)
        if gr is None:
            gr = self._build_grid(2.0 ** (k / 2.0), 2.0 ** ((k + 1) / 2.0))
            self._grids[k] = gr
        return gr

    def density_std(self, s) -> np.ndarray:
        """Density of the standardized hitting time (gamma = 1/2) at s > 0."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr <= 0) or not np.all(np.isfinite(s_arr)):
            raise ValueError("density needs finite t > 0")
        out = np.empty_like(s_arr)
        # each sqrt(2)-wide block of t gets its own u-grid
        blocks = np.floor(2.0 * np.log2(s_arr)).astype(np.int64)
        for k in np.unique(blocks):
            idx = np.flatnonzero(blocks == k)
            gr = self._grid_for_block(int(k))
            gw = gr.g * gr.w
            for i0 in range(0, idx.size, _CHUNK):
                ii = idx[i0:i0 + _CHUNK]
                sc = s_arr[ii]
                expo = self._prefactor(sc)[:, None] + sc[:, None] * gr.u[None, :] - gr.z[None, :]
                out[ii] = np.exp(expo) @ gw
        # the integral is nonnegative; roundoff can leave tiny negative values
        return np.maximum(out, 0.0)

    def density(self, t):
        t_arr = np.asarray(t, dtype=float)
        val = self.density_std(np.atleast_1d(t_arr) / self.tau**2) / self.tau**2
        return float(val[0]) if t_arr.ndim == 0 else val

    __call__ = density

    # ---------------------------------------------------------- t-integrals

    def support(self) -> tuple[float, float]:
        """Interval (standardized time) outside which the density is below tol * 1e-3."""
        if self._support is not None:
            return self._support
        thr = self.tol * 1e-3
        # rough location of the mass: deterministic root of the standardized drift
        b, q = self.beta_std, self.q_std
        root = b + math.sqrt(b * b + 2.0 * q)
        grid = np.geomspace(1e-3 * max(root, 1e-2), 6.0 * root + 20.0, 400)
        f = self.density_std(grid)
        peak = int(np.argmax(f))
        if f[peak] <= thr:
            raise QuadratureError("density is negligible everywhere on the scan", float(f[peak]))
        left = np.flatnonzero(f[:peak] < thr)
        lo = grid[left[-1]] if left.size else grid[0]
        right = np.flatnonzero(f[peak:] < thr)
        if not right.size:
            raise QuadratureError("right tail not resolved on the scan", float(f[-1]))
        hi = grid[peak + right[0]]
        self._support = (float(lo), float(hi))
        return self._support

    def _integrate(self, moment: int, panels: int) -> float:
        lo, hi = self.support()
        edges = np.linspace(lo, hi, panels + 1)
        s, w = _panel_nodes(edges, _GL_T)
        return float(np.sum(w * s**moment * self.density_std(s)))

    def _converged(self, moment: int, tol: float) -> tuple[float, float]:
        panels = 16
        prev = self._integrate(moment, panels)
        while True:
            panels *= 2
            cur = self._integrate(moment, panels)
            err = abs(cur - prev)
            if err < tol:
                return cur, err
            if panels > 4096:
                raise QuadratureError("t-quadrature did not converge", err)
            prev = cur

    def normalization(self) -> float:
        """Total mass; equals 1 up to quadrature error."""
        return self._converged(0, 1e-9)[0]

    def mean_with_error(self, tol: float = 5e-4) -> tuple[float, float]:
        # the mean scales by tau^2; tighten the standardized tolerance accordingly
        m, err = self._converged(1, min(tol, 1e-8) / self.tau**2)
        return m * self.tau**2, err * self.tau**2

    def mean(self, tol: float = 5e-4) -> float:
        return self.mean_with_error(tol)[0]

    def _build_cdf(self):
        lo, hi = self.support()
        knots = np.linspace(lo, hi, 4097)
        f_knots = self.density_std(knots)
        s, w = _panel_nodes(knots, _GL_T)
        pieces = (w * self.density_std(s)).reshape(knots.size - 1, -1).sum(axis=1)
        F = np.concatenate(([0.0], np.cumsum(pieces)))
        self._cdf = CubicHermiteSpline(knots, F, f_knots)
        self._cdf_total = float(F[-1])

    def cdf(self, t):
        """P(hitting time <= t); the spline is built on first use."""
        if self._cdf is None:
            self._build_cdf()
        lo, hi = self.support()
        s = np.asarray(t, dtype=float) / self.tau**2
        out = np.where(s <= lo, 0.0, np.where(s >= hi, self._cdf_total, self._cdf(np.clip(s, lo, hi))))
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def curve(self, t) -> np.ndarray:
        """Density on a grid; points at t <= 0 map to 0."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros_like(t_arr)
        pos = t_arr > 0
        if pos.any():
            out[pos] = self.density(t_arr[pos])
        return out
