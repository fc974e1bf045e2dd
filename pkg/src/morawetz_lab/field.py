"""Radial grid, model parameters, the w = r*u state and initial-data families.

Every integral over R^3 of a radial quantity is reduced to
``4*pi * int_0^r_max f(r) r^2 dr`` and evaluated with the composite
trapezoid rule on a uniform mesh that starts exactly at the origin.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

FOUR_PI = 4.0 * math.pi
MIN_NODES = 16


class FieldError(ValueError):
    """Invalid grid, parameters, data family or input array."""


class WeightKind(str, enum.Enum):
    POW_R = "pow_r"  # |x|^kappa
    POW_ONE_PLUS_R = "pow_one_plus_r"  # (1 + |x|)^kappa


def critical_kappa(p: float) -> float:
    """Decay threshold 3(5-p)/(p+3) above which tail data scatter."""
    return 3.0 * (5.0 - p) / (p + 3.0)


def critical_regularity(p: float) -> float:
    """Scaling-critical Sobolev index s_p = 3/2 - 2/(p-1)."""
    return 1.5 - 2.0 / (p - 1.0)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # shortest decimal repr, so 3.2 -> 16/5 rather than the binary value
        return Fraction(repr(x))
    return Fraction(x)


def critical_kappa_exact(p) -> Fraction:
    p = _as_fraction(p)
    return 3 * (5 - p) / (p + 3)


def critical_regularity_exact(p) -> Fraction:
    p = _as_fraction(p)
    return Fraction(3, 2) - 2 / (p - 1)


@dataclass(frozen=True)
class ModelParams:
    p: float = 4.0
    kappa: float = 3.0 / 7.0
    weight_kind: WeightKind = WeightKind.POW_R

    def __post_init__(self):
        if not (3.0 < self.p < 5.0):
            raise FieldError(f"exponent p={self.p} outside the sub-critical range (3, 5)")
        if not math.isfinite(self.kappa) or self.kappa < 0.0:
            raise FieldError(f"weight exponent kappa={self.kappa} must be finite and >= 0")
        object.__setattr__(self, "weight_kind", WeightKind(self.weight_kind))

    @property
    def kappa_critical(self) -> float:
        return critical_kappa(self.p)

    @property
    def s_p(self) -> float:
        return critical_regularity(self.p)

    @property
    def above_threshold(self) -> bool:
        """True when kappa exceeds the scattering threshold kappa(p)."""
        return self.kappa > self.kappa_critical

    def weight(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.weight_kind is WeightKind.POW_R:
            return r**self.kappa
        return (1.0 + r) ** self.kappa


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform radial mesh r_j = j*dr on [0, r_max] with trapezoid weights."""

    r_max: float
    n: int
    dr: float = field(init=False)
    r: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < MIN_NODES:
            raise FieldError(f"grid needs at least {MIN_NODES} nodes, got {self.n!r}")
        if not math.isfinite(self.r_max) or self.r_max <= 0.0:
            raise FieldError(f"r_max must be finite and positive, got {self.r_max!r}")
        n = int(self.n)
        dr = self.r_max / (n - 1)
        r = np.arange(n, dtype=float) * dr
        r[-1] = self.r_max
        w = np.full(n, dr)
        w[0] = w[-1] = 0.5 * dr
        r.flags.writeable = False
        w.flags.writeable = False
        for name, val in (("n", n), ("dr", dr), ("r", r), ("weights", w)):
            object.__setattr__(self, name, val)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.r_max, (self.n - 1) * factor + 1)

    def __eq__(self, other):
        return isinstance(other, Grid) and self.n == other.n and self.r_max == other.r_max

    def __hash__(self):
        return hash((self.r_max, self.n))


def make_grid(r_max: float, n: int) -> Grid:
    return Grid(float(r_max), n)


def quad(values, grid: Grid, radial_weight: Optional[Callable] = None) -> float:
    """Composite trapezoid approximation of ``4*pi * int values(r) radial_weight(r) dr``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise FieldError(f"expected {grid.n} samples, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise FieldError(f"non-finite value at node {bad} (r={grid.r[bad]:g})")
    if radial_weight is not None:
        values = values * radial_weight(grid.r)
    return FOUR_PI * float(np.dot(grid.weights, values))


def derivative(f: np.ndarray, dr: float) -> np.ndarray:
    """Second-order first derivative of an odd-extendable profile (w or w_t).

    Central inside; at the origin the central difference across r = 0 using
    f(-dr) = -f(dr), i.e. f_1/dr, which is also the value taken for u(0);
    one-sided second order at r_max.
    """
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * dr)
    d[0] = f[1] / dr
    d[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dr)
    return d


def u_from_w(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Recover u = w/r; at the origin u is the slope w_1/dr."""
    u = np.empty_like(w)
    u[1:] = w[1:] / grid.r[1:]
    u[0] = w[1] / grid.dr
    return u


@dataclass(frozen=True, eq=False)
class RadialState:
    """Sampled pair (w, w_t) = (r u, r u_t) at time ``t``."""

    grid: Grid
    w: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("w", "v"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (self.grid.n,):
                raise FieldError(f"{name} has shape {a.shape}, grid has {self.grid.n} nodes")
            object.__setattr__(self, name, a)

    @property
    def u(self) -> np.ndarray:
        return u_from_w(self.w, self.grid)

    @property
    def ut(self) -> np.ndarray:
        return u_from_w(self.v, self.grid)

    def with_time(self, t: float) -> "RadialState":
        return RadialState(self.grid, self.w, self.v, t)

    def __sub__(self, other: "RadialState") -> "RadialState":
        return RadialState(self.grid, self.w - other.w, self.v - other.v, self.t)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "RadialState":
        return cls(grid, np.zeros(grid.n), np.zeros(grid.n), t)


# --- initial data ---------------------------------------------------------


class DataKind(str, enum.Enum):
    GAUSSIAN_BUMP = "gaussian"
    COMPACT_BUMP = "compact"
    POWER_TAIL = "power_tail"
    OUTGOING_WAVE = "outgoing"


BUMP_POWER = 4  # (1 - s^2)^4 is C^3 across the support edge


def _bump(s: np.ndarray):
    """(1 - s^2)^4 on |s| < 1 and its derivative in s."""
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 0.0)
    f = q**BUMP_POWER
    df = np.where(inside, -2.0 * BUMP_POWER * s * q ** (BUMP_POWER - 1), 0.0)
    return f, df


def _smooth_step_down(x: np.ndarray) -> np.ndarray:
    """C-infinity transition from 1 (x <= 0) to 0 (x >= 1)."""
    x = np.clip(x, 0.0, 1.0)

    def g(y):
        with np.errstate(divide="ignore"):
            return np.where(y > 0.0, np.exp(-1.0 / np.where(y > 0.0, y, 1.0)), 0.0)

    a, b = g(1.0 - x), g(x)
    return a / (a + b)


@dataclass(frozen=True)
class DataFamily:
    """Radial initial data (u_0, u_1).

    kind           profile
    gaussian       u_0 = A exp(-(r/a)^2), u_1 = 0
    compact        u_0 = A (1 - (r/a)^2)^4 on r < a, u_1 = 0
    power_tail     u_0 = A (1 + r^2)^(-gamma/2), u_1 = 0
    outgoing       w_0 = phi(r), w_t = -phi'(r), phi a bump on [offset, offset + a]

    ``taper`` (power_tail only) rolls the tail smoothly to zero over the last
    ``taper`` length units before r_max; 0 means a hard cut at r_max.
    """

    kind: DataKind = DataKind.GAUSSIAN_BUMP
    amplitude: float = 1.0
    scale: float = 1.0
    gamma: Optional[float] = None
    offset: float = 2.0
    taper: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DataKind(self.kind))
        if not math.isfinite(self.amplitude):
            raise FieldError("amplitude must be finite")
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise FieldError(f"scale must be positive, got {self.scale}")
        if self.kind is DataKind.POWER_TAIL:
            if self.gamma is None or not self.gamma > 0.0:
                raise FieldError("power_tail data needs a positive tail exponent gamma")
        if self.taper < 0.0:
            raise FieldError("taper length must be >= 0")
        if self.kind is DataKind.OUTGOING_WAVE and self.offset < 0.0:
            raise FieldError("outgoing profile must sit in r >= 0")

    # profiles as functions of r; used both for sampling and by tests/oracles
    def u0(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        A, a = self.amplitude, self.scale
        if self.kind is DataKind.GAUSSIAN_BUMP:
            return A * np.exp(-((r / a) ** 2))
        if self.kind is DataKind.COMPACT_BUMP:
            return A * _bump(r / a)[0]
        if self.kind is DataKind.POWER_TAIL:
            return A * (1.0 + r * r) ** (-0.5 * self.gamma)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0.0, self.phi(r) / np.where(r > 0, r, 1.0), 0.0)

    def phi(self, r) -> np.ndarray:
        """Outgoing 1D profile (w_0 for the outgoing family)."""
        half = 0.5 * self.scale
        mid = self.offset + half
        return self.amplitude * _bump((np.asarray(r, dtype=float) - mid) / half)[0]

    def dphi(self, r) -> np.ndarray:
        half = 0.5 * self.scale
        mid = self.offset + half
        return self.amplitude * _bump((np.asarray(r, dtype=float) - mid) / half)[1] / half

    def support_radius(self) -> float:
        """Radius beyond which the data vanish identically (inf for tails)."""
        if self.kind is DataKind.COMPACT_BUMP:
            return self.scale
        if self.kind is DataKind.OUTGOING_WAVE:
            return self.offset + self.scale
        if self.kind is DataKind.GAUSSIAN_BUMP:
            # below double-precision underflow of relative size
            return self.scale * 6.1
        return math.inf

    def check_admissible(self, params: ModelParams) -> None:
        """Reject tails whose kappa-weighted energy diverges.

        With u_0 ~ r^-gamma the weighted gradient density behaves like
        r^(kappa - 2 gamma), the potential like r^(kappa + 2 - gamma (p+1)).
        """
        if self.kind is not DataKind.POWER_TAIL:
            return
        g, k, p = self.gamma, params.kappa, params.p
        if not 2.0 * g > k + 1.0:
            raise FieldError(
                f"power_tail gamma={g} gives divergent kappa-weighted gradient energy: "
                f"need 2*gamma > kappa + 1 (= {k + 1.0:g})"
            )
        if not g * (p + 1.0) > k + 3.0:
            raise FieldError(
                f"power_tail gamma={g} gives divergent kappa-weighted potential energy: "
                f"need gamma*(p+1) > kappa + 3 (= {k + 3.0:g})"
            )


def sample_data(family: DataFamily, grid: Grid, params: ModelParams) -> RadialState:
    """Sample (w, w_t) = (r u_0, r u_1) on the grid at t = 0."""
    family.check_admissible(params)
    r = grid.r
    if family.kind is DataKind.OUTGOING_WAVE:
        w = family.phi(r)
        v = -family.dphi(r)
    else:
        w = r * family.u0(r)
        v = np.zeros(grid.n)
        if family.kind is DataKind.POWER_TAIL and family.taper > 0.0:
            start = grid.r_max - family.taper
            w = w * _smooth_step_down((r - start) / family.taper)
    w = np.array(w, dtype=float)
    v = np.array(v, dtype=float)
    w[0] = v[0] = 0.0
    # the outer node is a Dirichlet node
    w[-1] = v[-1] = 0.0
    return RadialState(grid, w, v, 0.0)
