"""Velocity-Verlet integration of w_tt - w_rr = -|w/r|^(p-1) (w/r) r.

The origin and the outer node are Dirichlet nodes.  With the trapezoid
weights the semi-discrete system is Hamiltonian, so the scheme is
time-reversible and its energy error stays bounded at O(dt^2).
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .field import Grid, ModelParams, RadialState

logger = logging.getLogger(__name__)

BLOWUP_FACTOR = 10.0
# |w| below this fraction of its maximum counts as "no signal" at the boundary
SIGNAL_FLOOR = 1e-14

Observer = Callable[[RadialState, float, float], None]


class StepperError(RuntimeError):
    """Non-finite values or runaway growth during time stepping."""


class BoundaryReachWarning(UserWarning):
    pass


class BoundaryPolicy(str, enum.Enum):
    HARD_ZERO = "hard_zero"


@dataclass(frozen=True)
class StepperConfig:
    cfl_lambda: float = 0.5
    boundary: BoundaryPolicy = BoundaryPolicy.HARD_ZERO
    nonlinear: bool = True

    def __post_init__(self):
        if not (0.0 < self.cfl_lambda <= 1.0):
            raise ValueError(f"cfl_lambda={self.cfl_lambda} must lie in (0, 1]")
        object.__setattr__(self, "boundary", BoundaryPolicy(self.boundary))

    def dt(self, grid: Grid) -> float:
        return self.cfl_lambda * grid.dr


def _force(w: np.ndarray, r: np.ndarray, p: float) -> np.ndarray:
    F = np.zeros_like(w)
    u = w[1:] / r[1:]
    F[1:] = -np.sign(u) * np.abs(u) ** p * r[1:]
    return F


def nonlinear_force(state: RadialState, params: ModelParams) -> np.ndarray:
    """F_j = -|u_j|^(p-1) u_j r_j with u_j = w_j / r_j; F_0 = 0."""
    F = _force(state.w, state.grid.r, params.p)
    if not np.all(np.isfinite(F)):
        j = int(np.flatnonzero(~np.isfinite(F))[0])
        raise StepperError(f"non-finite nonlinear force at node {j} (r={state.grid.r[j]:g})")
    return F


def _acceleration(w: np.ndarray, grid: Grid, p: float, nonlinear: bool) -> np.ndarray:
    a = np.zeros_like(w)
    a[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (grid.dr * grid.dr)
    if nonlinear:
        a += _force(w, grid.r, p)
    a[0] = a[-1] = 0.0
    return a


def _verlet(w, v, a, dt, grid, p, nonlinear):
    v_half = v + 0.5 * dt * a
    w_new = w + dt * v_half
    w_new[0] = w_new[-1] = 0.0
    a_new = _acceleration(w_new, grid, p, nonlinear)
    v_new = v_half + 0.5 * dt * a_new
    v_new[0] = v_new[-1] = 0.0
    return w_new, v_new, a_new


def _check(w_old: np.ndarray, w_new: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(w_new)):
        j = int(np.flatnonzero(~np.isfinite(w_new))[0])
        raise StepperError(f"non-finite solution at node {j} after t={t:g}")
    before = float(np.max(np.abs(w_old)))
    after = float(np.max(np.abs(w_new)))
    if after > BLOWUP_FACTOR * before and before > 0.0:
        raise StepperError(
            f"max|w| jumped from {before:.3e} to {after:.3e} in one step at t={t:g}; "
            "scheme is unstable (check cfl_lambda)"
        )


def step(
    state: RadialState,
    cfg: StepperConfig,
    params: ModelParams,
    dt: Optional[float] = None,
) -> RadialState:
    """One kick-drift-kick step; ``dt`` defaults to cfl_lambda*dr and may be negative."""
    g = state.grid
    if dt is None:
        dt = cfg.dt(g)
    if abs(dt) > g.dr * (1.0 + 1e-12):
        raise ValueError(f"|dt|={abs(dt):g} violates the CFL bound dr={g.dr:g}")
    a = _acceleration(state.w, g, params.p, cfg.nonlinear)
    w, v, _ = _verlet(state.w, state.v, a, dt, g, params.p, cfg.nonlinear)
    _check(state.w, w, state.t)
    return RadialState(g, w, v, state.t + dt)


def signal_radius(state: RadialState) -> float:
    """Largest node radius carrying a non-negligible part of (w, w_t)."""
    mag = np.maximum(np.abs(state.w), np.abs(state.v))
    peak = float(mag.max())
    if peak == 0.0:
        return 0.0
    idx = np.flatnonzero(mag > SIGNAL_FLOOR * peak)
    return float(state.grid.r[idx[-1]])


def step_count(T: float, dt: float) -> int:
    """Number of steps of size at most dt needed to cover |T|."""
    n = abs(T) / dt
    k = int(math.ceil(n - 1e-9))
    return max(k, 0)


def evolve(
    state: RadialState,
    T: float,
    cfg: StepperConfig,
    params: ModelParams,
    observers: Iterable[Observer] = (),
    allow_boundary: bool = False,
) -> RadialState:
    """Advance ``state`` by the signed duration ``T``.

    Observers are called once with the initial state and dt = 0, then after
    every accepted step with (state, t, dt), dt being the signed step taken.
    The last step is shortened to land exactly on ``state.t + T``.
    """
    g = state.grid
    observers = list(observers)
    reach = signal_radius(state) + abs(T)
    if reach > g.r_max and not allow_boundary:
        warnings.warn(
            f"signal may reach the outer boundary: support {signal_radius(state):g} + |T| "
            f"{abs(T):g} > r_max {g.r_max:g}",
            BoundaryReachWarning,
            stacklevel=2,
        )
    for obs in observers:
        obs(state, state.t, 0.0)
    if T == 0.0:
        return state

    h = cfg.dt(g)
    nsteps = step_count(T, h)
    sign = 1.0 if T > 0 else -1.0
    t0 = state.t
    w, v = state.w.copy(), state.v.copy()
    a = _acceleration(w, g, params.p, cfg.nonlinear)
    t = t0
    for k in range(1, nsteps + 1):
        t_next = t0 + T if k == nsteps else t0 + sign * k * h
        dt = t_next - t
        w_new, v, a = _verlet(w, v, a, dt, g, params.p, cfg.nonlinear)
        _check(w, w_new, t)
        w, t = w_new, t_next
        if observers:
            snap = RadialState(g, w, v, t)
            for obs in observers:
                obs(snap, t, dt)
    logger.debug("evolved %d steps to t=%g", nsteps, t)
    return RadialState(g, w, v, t)
