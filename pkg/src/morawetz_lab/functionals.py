"""Instantaneous functionals of a radial state.

Local densities are carried as rho(r) = r^2 e(r), so that every volume
integral is 4 pi times a plain 1D integral in r.  With u = w/r,

    r^2 u_r^2   = (w_r - w/r)^2
    r^2 u_t^2   = w_t^2
    r^2 |u|^q   = |w|^q r^(2-q)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .field import FOUR_PI, FieldError, Grid, ModelParams, RadialState, WeightKind, derivative


@dataclass(frozen=True)
class EnergySplit:
    gradient: float
    kinetic: float
    potential: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.gradient + self.kinetic + self.potential)


@dataclass(frozen=True)
class ChargePair:
    q0: float
    q1: float

    @property
    def total(self) -> float:
        return self.q0 + self.q1


def _w_over_r(w: np.ndarray, grid: Grid) -> np.ndarray:
    out = np.empty_like(w)
    out[1:] = w[1:] / grid.r[1:]
    out[0] = w[1] / grid.dr
    return out


def _abs_u_pow(state: RadialState, q: float) -> np.ndarray:
    return np.abs(state.u) ** q


def radial_gradient_sq(state: RadialState) -> np.ndarray:
    """r^2 u_r^2 = (w_r - w/r)^2, zero at the origin."""
    g = state.grid
    wr = derivative(state.w, g.dr)
    d = wr - _w_over_r(state.w, g)
    d[0] = 0.0
    return d * d


def energy_density(state: RadialState, params: ModelParams) -> np.ndarray:
    """rho = r^2 (|u_r|^2/2 + |u_t|^2/2 + |u|^(p+1)/(p+1)) at the nodes."""
    r = state.grid.r
    pot = _abs_u_pow(state, params.p + 1.0) * r * r / (params.p + 1.0)
    return 0.5 * radial_gradient_sq(state) + 0.5 * state.v * state.v + pot


def energy(state: RadialState, params: ModelParams) -> EnergySplit:
    """Gradient, kinetic and potential energy from the same local density that
    the cut integrals use, so that ``exterior_energy(state, 0)`` equals the total.

    (Integrating w_r^2 instead, which agrees in the continuum, carries a larger
    O(dr^2) error on smooth data.)
    """
    g = state.grid
    grad = 0.5 * FOUR_PI * float(np.dot(g.weights, radial_gradient_sq(state)))
    kin = 0.5 * FOUR_PI * float(np.dot(g.weights, state.v * state.v))
    upow = _abs_u_pow(state, params.p + 1.0) * g.r * g.r
    pot = FOUR_PI * float(np.dot(g.weights, upow)) / (params.p + 1.0)
    return EnergySplit(grad, kin, pot)


# --- integrals cut at a radius ----------------------------------------------


def _power_diff(xa: np.ndarray, xb: np.ndarray, q: float) -> np.ndarray:
    """xb^q - xa^q without cancellation when xb is close to xa."""
    out = np.empty_like(xb)
    pos = xa > 0.0
    out[pos] = xa[pos] ** q * np.expm1(q * np.log1p((xb[pos] - xa[pos]) / xa[pos]))
    out[~pos] = xb[~pos] ** q
    return out


def tail_integral(rho: np.ndarray, grid: Grid, cut: float) -> float:
    """int_cut^r_max of the piecewise-linear interpolant of rho."""
    if cut <= 0.0:
        return float(np.dot(grid.weights, rho))
    if cut >= grid.r_max:
        return 0.0
    j = min(int(cut // grid.dr), grid.n - 2)
    h = grid.r[j + 1] - cut
    rho_cut = rho[j] + (rho[j + 1] - rho[j]) * (cut - grid.r[j]) / grid.dr
    part = 0.5 * h * (rho_cut + rho[j + 1])
    rest = grid.dr * (0.5 * rho[j + 1] + rho[j + 2 : -1].sum() + 0.5 * rho[-1]) if j + 1 < grid.n - 1 else 0.0
    return float(part + rest)


def weighted_tail_integral(rho: np.ndarray, grid: Grid, cut: float, kappa: float, shift: float = 0.0) -> float:
    """int_cut^r_max (r - cut + shift)^kappa rho(r) dr, rho piecewise linear.

    The power weight is integrated exactly against each linear piece, so the
    result is smooth in ``cut`` even when kappa < 1.
    """
    if cut >= grid.r_max:
        return 0.0
    cut = max(cut, 0.0)
    j0 = min(int(cut // grid.dr), grid.n - 2)
    r = grid.r
    ra = r[j0:-1].copy()
    rb = r[j0 + 1 :]
    rho_a = rho[j0:-1].copy()
    rho_b = rho[j0 + 1 :]
    if cut > ra[0]:
        rho_a[0] = rho_a[0] + (rho_b[0] - rho_a[0]) * (cut - ra[0]) / grid.dr
        ra[0] = cut
    h = rb - ra
    keep = h > 0.0
    ra, rb, rho_a, rho_b, h = ra[keep], rb[keep], rho_a[keep], rho_b[keep], h[keep]
    xa = ra - cut + shift
    xb = rb - cut + shift
    m0 = _power_diff(xa, xb, kappa + 1.0) / (kappa + 1.0)
    m1 = _power_diff(xa, xb, kappa + 2.0) / (kappa + 2.0) - xa * m0
    return float(np.sum(rho_a * m0 + (rho_b - rho_a) / h * m1))


def exterior_energy(state: RadialState, R: float, params: ModelParams) -> float:
    """Energy carried by |x| > R."""
    g = state.grid
    if R < 0.0 or R > g.r_max:
        raise FieldError(f"radius R={R} outside [0, r_max={g.r_max}]")
    return FOUR_PI * tail_integral(energy_density(state, params), g, R)


def weighted_energy(state: RadialState, t, params: ModelParams) -> float:
    """Escaping energy I(t) = int_{|x|>|t|} (|x| - |t|)^kappa e dx.

    For ``WeightKind.POW_ONE_PLUS_R`` the weight is (1 + |x| - |t|)^kappa,
    which reduces to (1 + |x|)^kappa at t = 0.
    """
    if t is None:
        t = state.t
    cut = abs(t)
    g = state.grid
    rho = energy_density(state, params)
    if params.kappa == 0.0:
        return FOUR_PI * tail_integral(rho, g, cut)
    shift = 1.0 if params.weight_kind is WeightKind.POW_ONE_PLUS_R else 0.0
    return FOUR_PI * weighted_tail_integral(rho, g, cut, params.kappa, shift)


# --- pointwise bound ---------------------------------------------------------


def lemma_energy(state: RadialState, params: ModelParams) -> float:
    """int (|grad u|^2 + |u|^(p+1)) dx, the quantity bounding |u| pointwise."""
    e = energy(state, params)
    return 2.0 * e.gradient + (params.p + 1.0) * e.potential


def lemma_constant(p: float) -> float:
    """Explicit constant in |u(r)| <= C E^(2/(p+3)) r^(-4/(p+3)).

    Tracking constants through the radial argument (a lower bound |u| >= S/2
    on an interval of length r0^2 S^2 / 4E, then the L^(p+1) bound) gives
    S^(p+3) r0^4 <= 2^(p+1) E^2 / pi.
    """
    return (2.0 ** (p + 1.0) / math.pi) ** (1.0 / (p + 3.0))


def pointwise_decay_ratio(state: RadialState, params: ModelParams) -> float:
    """sup_r r^(4/(p+3)) |u(r)| / E^(2/(p+3)), E = int |grad u|^2 + |u|^(p+1)."""
    E = lemma_energy(state, params)
    if E <= 0.0:
        return 0.0
    p = params.p
    r = state.grid.r
    vals = r[1:] ** (4.0 / (p + 3.0)) * np.abs(state.w[1:] / r[1:])
    return float(vals.max()) / E ** (2.0 / (p + 3.0))


# --- conformal charge ----------------------------------------------------------


def conformal_charge(state: RadialState, t, params: ModelParams) -> ChargePair:
    """Radial form of Q0 = |x psi + t grad phi|^2 + |(t psi + 2 phi) x/|x| + |x| grad phi|^2
    and Q1 = 2/(p+1) int (|x|^2 + t^2) |phi|^(p+1).

    Multiplying the radial components by r and writing phi = w/r, psi = w_t/r:
        r (r psi + t phi_r)            = r w_t + t (w_r - w/r)
        r (t psi + 2 phi + r phi_r)    = t w_t + w + r w_r
    """
    if t is None:
        t = state.t
    g = state.grid
    r = g.r
    w, v = state.w, state.v
    p = params.p
    # non-finite input is caught below; no need for numpy to warn on the way
    with np.errstate(invalid="ignore", over="ignore"):
        wr = derivative(w, g.dr)
        grad = wr - _w_over_r(w, g)
        grad[0] = 0.0
        a = r * v + t * grad
        b = t * v + w + r * wr
        q0 = FOUR_PI * float(np.dot(g.weights, a * a + b * b))
        upow = _abs_u_pow(state, p + 1.0) * r * r
        q1 = 2.0 / (p + 1.0) * FOUR_PI * float(np.dot(g.weights, (r * r + t * t) * upow))
    if not (math.isfinite(q0) and math.isfinite(q1)):
        raise FieldError("conformal charge is not finite for this state")
    return ChargePair(q0, q1)


def potential_integral(state: RadialState, params: ModelParams) -> float:
    """int |u|^(p+1) dx."""
    g = state.grid
    return FOUR_PI * float(np.dot(g.weights, _abs_u_pow(state, params.p + 1.0) * g.r * g.r))


def conformal_rate(state: RadialState, t, params: ModelParams) -> float:
    """Predicted dQ/dt = 4 (3 - p) t / (p + 1) int |u|^(p+1) dx; ``t=None`` uses state.t."""
    if t is None:
        t = state.t
    p = params.p
    return 4.0 * (3.0 - p) * t / (p + 1.0) * potential_integral(state, params)


# --- fractional norms ----------------------------------------------------------


def sobolev_norm(state: RadialState, s: float, component: str = "w") -> float:
    """Squared homogeneous H^s norm in R^3 of u = w/r (or of u_t with component="v").

    For radial u, |u|_{H^s}^2 = 8 int_0^inf k^(2s) |W(k)|^2 dk with W the sine
    transform of w.  On [0, r_max] with Dirichlet ends the sine series of w is
    a DST-I of the interior samples, giving 4 pi (r_max/2) sum k_m^(2s) c_m^2.
    """
    if not (0.0 <= s <= 1.0):
        raise FieldError(f"regularity s={s} outside [0, 1]")
    g = state.grid
    x = {"w": state.w, "v": state.v}[component]
    c = fft.dst(x[1:-1], type=1) / (g.n - 1)
    k = math.pi * np.arange(1, g.n - 1) / g.r_max
    return FOUR_PI * 0.5 * g.r_max * float(np.sum(k ** (2.0 * s) * c * c))


def energy_norm_sq(state: RadialState) -> float:
    """|u|_{H^1}^2 + |u_t|_{L^2}^2 via the w-form gradient."""
    g = state.grid
    wr = derivative(state.w, g.dr)
    return FOUR_PI * float(np.dot(g.weights, wr * wr + state.v * state.v))
