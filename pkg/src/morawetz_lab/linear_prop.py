"""Exact radial free-wave propagator.

For radial data the free wave equation in R^3 becomes the 1D wave equation
for w = r*u on the half line with w(0, t) = 0.  Extending w_0 and w_t oddly
to the whole line, d'Alembert gives

    w(r, t) = (w0(r + t) + w0(r - t)) / 2 + (V(r + t) - V(r - t)) / 2,

with V an antiderivative of the extended velocity.  The data are taken as
the piecewise-linear interpolants of the grid samples (zero beyond r_max)
and V is integrated exactly, so the oracle involves no time stepping.
"""
from __future__ import annotations

import math

import numpy as np

from .field import FOUR_PI, FieldError, Grid, RadialState, derivative


class FreeEvolver:
    """Immutable d'Alembert evaluator for one initial state."""

    def __init__(self, state: RadialState):
        if not (np.all(np.isfinite(state.w)) and np.all(np.isfinite(state.v))):
            raise FieldError("free evolution needs finite initial data")
        self.grid = state.grid
        self.t0 = state.t
        self._w = state.w.copy()
        self._v = state.v.copy()
        self._w.flags.writeable = False
        self._v.flags.writeable = False
        # V at the nodes: exact integral of the linear interpolant
        cell = 0.5 * self.grid.dr * (self._v[1:] + self._v[:-1])
        self._V = np.concatenate(([0.0], np.cumsum(cell)))
        self._wr = derivative(self._w, self.grid.dr)

    def _locate(self, x: np.ndarray):
        g = self.grid
        j = np.clip(np.floor(x / g.dr).astype(np.intp), 0, g.n - 2)
        return j, x - g.r[j]

    def _w_odd(self, x: np.ndarray) -> np.ndarray:
        s = np.sign(x)
        a = np.abs(x)
        val = np.interp(a, self.grid.r, self._w, right=0.0)
        return s * val

    def _V_even(self, x: np.ndarray) -> np.ndarray:
        g = self.grid
        a = np.minimum(np.abs(x), g.r_max)
        j, h = self._locate(a)
        slope = (self._v[j + 1] - self._v[j]) / g.dr
        return self._V[j] + h * self._v[j] + 0.5 * h * h * slope

    def _w_t_odd(self, x: np.ndarray) -> np.ndarray:
        return np.sign(x) * np.interp(np.abs(x), self.grid.r, self._v, right=0.0)

    def _w0_slope_even(self, x: np.ndarray) -> np.ndarray:
        # interpolated second-order slope; the cell slope of the interpolant
        # is only first-order accurate at the nodes
        return np.interp(np.abs(x), self.grid.r, self._wr, right=0.0)

    def at(self, t: float) -> RadialState:
        """State at absolute time ``t`` sampled back on the grid."""
        if not math.isfinite(t):
            raise FieldError("time must be finite")
        s = t - self.t0
        r = self.grid.r
        if s == 0.0:
            return RadialState(self.grid, self._w.copy(), self._v.copy(), t)
        xp, xm = r + s, r - s
        w = 0.5 * (self._w_odd(xp) + self._w_odd(xm)) + 0.5 * (self._V_even(xp) - self._V_even(xm))
        # w_t = (w0'(r+s) - w0'(r-s))/2 + (v0(r+s) + v0(r-s))/2
        v = 0.5 * (self._w0_slope_even(xp) - self._w0_slope_even(xm)) + 0.5 * (
            self._w_t_odd(xp) + self._w_t_odd(xm)
        )
        w[0] = v[0] = 0.0
        return RadialState(self.grid, w, v, t)


def free_evolve(state: RadialState, t: float) -> RadialState:
    """Apply the free propagator S_L(t) to ``state`` (t may be negative).

    The returned state is stamped ``state.t + t``.
    """
    return FreeEvolver(state).at(state.t + t)


def linear_energy(state: RadialState) -> float:
    """4 pi int (w_r^2 + w_t^2)/2 dr, the free energy of (u, u_t)."""
    g = state.grid
    wr = derivative(state.w, g.dr)
    return 0.5 * FOUR_PI * float(np.dot(g.weights, wr * wr + state.v * state.v))
