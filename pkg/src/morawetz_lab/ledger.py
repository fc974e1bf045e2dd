"""Space-time accumulators and end-of-run analyses.

A :class:`Ledger` is attached to an evolution as an observer and integrates,
with the trapezoid rule in time, the integrands of the localized Morawetz
inequality for each tracked radius R:

    (1/2R) int int_{|x|<R} e  +  (1/4R^2) int int_{|x|=R} |u|^2
      + (p-3)/(2(p+1)R) int int_{|x|<R} |u|^(p+1)
      + (p-1)/(2(p+1))  int int_{|x|>R} |u|^(p+1)/|x|      <=  E,

the escaped-energy average (1/2R) int_{-R}^{R} int_{|x|>R} e, and the
scattering-size integral int int |u|^(2(p-1)).  Forward and backward runs
are integrated separately and summed with :meth:`Ledger.merge`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .field import FOUR_PI, Grid, ModelParams, RadialState
from .functionals import energy_density, energy_norm_sq
from .linear_prop import free_evolve

DEFAULT_RADII = (1.0, 2.0, 4.0, 8.0, 16.0)


class LedgerError(RuntimeError):
    pass


def default_radii(r_max: float, T_max: float, radii: Sequence[float] = DEFAULT_RADII) -> List[float]:
    """Dyadic radii restricted to (0, r_max - T_max) so exterior integrals stay clean."""
    return [R for R in radii if 0.0 < R < r_max - T_max]


def _cumulative_at(rho: np.ndarray, grid: Grid, radii: np.ndarray):
    """int_0^R of the piecewise-linear interpolant of rho, for each R; plus the total."""
    cum = np.empty(grid.n)
    cum[0] = 0.0
    np.cumsum(0.5 * grid.dr * (rho[1:] + rho[:-1]), out=cum[1:])
    j = np.minimum((radii // grid.dr).astype(np.intp), grid.n - 2)
    h = radii - grid.r[j]
    rho_R = rho[j] + (rho[j + 1] - rho[j]) * h / grid.dr
    return cum[j] + 0.5 * h * (rho[j] + rho_R), cum[-1]


@dataclass(frozen=True)
class MorawetzTerms:
    R: float
    interior_energy_avg: float
    sphere_trace: float
    interior_potential: float
    exterior_morawetz: float

    @property
    def total(self) -> float:
        return self.interior_energy_avg + self.sphere_trace + self.interior_potential + self.exterior_morawetz


@dataclass
class _Series:
    """Samples (|t|, g) of one run, for window integrals after the fact."""

    t: List[float] = field(default_factory=list)
    g: List[float] = field(default_factory=list)

    def window(self, a: float, b: float) -> float:
        if len(self.t) < 2:
            return 0.0
        t = np.asarray(self.t)
        g = np.asarray(self.g)
        lo, hi = np.minimum(t[:-1], t[1:]), np.maximum(t[:-1], t[1:])
        ga = np.where(t[:-1] <= t[1:], g[:-1], g[1:])
        gb = np.where(t[:-1] <= t[1:], g[1:], g[:-1])
        span = hi - lo
        a_c = np.clip(a, lo, hi)
        b_c = np.clip(b, lo, hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            fa = np.where(span > 0, (a_c - lo) / span, 0.0)
            fb = np.where(span > 0, (b_c - lo) / span, 0.0)
        g_a = ga + fa * (gb - ga)
        g_b = ga + fb * (gb - ga)
        return float(np.sum(0.5 * (b_c - a_c) * (g_a + g_b)))


class Ledger:
    """Running space-time integrals for one or more evolutions.

    Usable directly as an evolve() observer: ``ledger(state, t, dt)``.
    """

    def __init__(self, grid: Grid, params: ModelParams, radii: Sequence[float] = DEFAULT_RADII):
        radii = np.asarray(sorted(float(R) for R in radii), dtype=float)
        if radii.size and (radii[0] <= 0.0 or radii[-1] >= grid.r_max):
            raise LedgerError(f"tracked radii must lie in (0, r_max={grid.r_max})")
        self.grid = grid
        self.params = params
        self.radii = radii
        m = radii.size
        # raw space-time integrals (no Morawetz coefficients)
        self.interior_energy = np.zeros(m)
        self.trace_sq = np.zeros(m)  # int u(R, t)^2 dt
        self.interior_pot = np.zeros(m)
        self.exterior_mor = np.zeros(m)  # int int_{|x|>R} |u|^(p+1)/|x|
        self.escaped = np.zeros(m)  # int_{|t|<R} int_{|x|>R} e
        self.l2p2 = 0.0
        self.runs: List[_Series] = []
        self._prev: Optional[dict] = None
        self._prev_t = 0.0

    # -- accumulation --------------------------------------------------------

    def _integrands(self, state: RadialState) -> dict:
        g, p = self.grid, self.params.p
        r = g.r
        au = np.abs(state.u)
        rho_e = energy_density(state, self.params)
        upow = au ** (p + 1.0)
        rho_pot = upow * r * r
        rho_mor = upow * r
        e_in, e_tot = _cumulative_at(rho_e, g, self.radii)
        pot_in, _ = _cumulative_at(rho_pot, g, self.radii)
        mor_in, mor_tot = _cumulative_at(rho_mor, g, self.radii)
        wR = np.interp(self.radii, r, state.w)
        return {
            "e_in": FOUR_PI * e_in,
            "e_out": FOUR_PI * (e_tot - e_in),
            "trace": (wR / self.radii) ** 2,
            "pot_in": FOUR_PI * pot_in,
            "mor_out": FOUR_PI * (mor_tot - mor_in),
            "l2p2": FOUR_PI * float(np.dot(g.weights, au ** (2.0 * (p - 1.0)) * r * r)),
        }

    def accumulate(self, state: RadialState, t: float, dt: float) -> None:
        """Trapezoid-in-time update; a call with dt == 0 (re)starts a run at ``t``."""
        cur = self._integrands(state)
        if dt == 0.0 or self._prev is None:
            self.runs.append(_Series())
        else:
            prev, h = self._prev, abs(dt)
            self.interior_energy += 0.5 * h * (prev["e_in"] + cur["e_in"])
            self.trace_sq += 0.5 * h * (prev["trace"] + cur["trace"])
            self.interior_pot += 0.5 * h * (prev["pot_in"] + cur["pot_in"])
            self.exterior_mor += 0.5 * h * (prev["mor_out"] + cur["mor_out"])
            self.l2p2 += 0.5 * h * (prev["l2p2"] + cur["l2p2"])
            self.escaped += self._clipped(abs(self._prev_t), abs(t), prev["e_out"], cur["e_out"])
        self.runs[-1].t.append(abs(t))
        self.runs[-1].g.append(cur["l2p2"])
        self._prev, self._prev_t = cur, t

    __call__ = accumulate

    def _clipped(self, s0: float, s1: float, g0: np.ndarray, g1: np.ndarray) -> np.ndarray:
        """Trapezoid over [s0, s1] restricted to |t| <= R, per radius."""
        if s1 < s0:
            s0, s1, g0, g1 = s1, s0, g1, g0
        span = s1 - s0
        if span == 0.0:
            return np.zeros_like(g0)
        R = self.radii
        top = np.clip(R, s0, s1)
        f = (top - s0) / span
        g_top = g0 + f * (g1 - g0)
        return 0.5 * (top - s0) * (g0 + g_top)

    def merge(self, other: "Ledger") -> "Ledger":
        """Sum of two ledgers on the same grid and radii (e.g. forward + backward)."""
        if other.grid != self.grid or not np.array_equal(other.radii, self.radii):
            raise LedgerError("can only merge ledgers with identical grid and radii")
        out = Ledger(self.grid, self.params, self.radii)
        for name in ("interior_energy", "trace_sq", "interior_pot", "exterior_mor", "escaped"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.l2p2 = self.l2p2 + other.l2p2
        out.runs = self.runs + other.runs
        return out

    # -- views -----------------------------------------------------------------

    def terms(self) -> List[MorawetzTerms]:
        p = self.params.p
        out = []
        for k, R in enumerate(self.radii):
            out.append(
                MorawetzTerms(
                    R=float(R),
                    interior_energy_avg=self.interior_energy[k] / (2.0 * R),
                    # (1/4R^2) int int_{|x|=R} |u|^2 dsigma dt, surface area 4 pi R^2
                    sphere_trace=math.pi * self.trace_sq[k],
                    interior_potential=(p - 3.0) / (2.0 * (p + 1.0) * R) * self.interior_pot[k],
                    exterior_morawetz=(p - 1.0) / (2.0 * (p + 1.0)) * self.exterior_mor[k],
                )
            )
        return out

    def key_estimate_rhs(self) -> np.ndarray:
        """(1/2R) int_{-R}^{R} int_{|x|>R} e dx dt for each radius."""
        return self.escaped / (2.0 * self.radii)

    @property
    def t_max(self) -> float:
        return max((max(s.t) for s in self.runs if s.t), default=0.0)

    def l2p2_window(self, a: float, b: float) -> float:
        return sum(s.window(a, b) for s in self.runs)


# --- reports ---------------------------------------------------------------------


@dataclass
class MorawetzRow:
    R: float
    terms: MorawetzTerms
    residual: float  # E - sum of the four terms
    key_rhs: float
    key_margin: float  # key_rhs - exterior_morawetz
    ok_inequality: bool
    ok_key: bool


@dataclass
class MorawetzReport:
    energy: float
    tol: float
    rows: List[MorawetzRow]

    @property
    def violations(self) -> List[float]:
        return [row.R for row in self.rows if not (row.ok_inequality and row.ok_key)]

    @property
    def ok(self) -> bool:
        return not self.violations


def morawetz_report(ledger: Ledger, E: float, tol: float = 1e-2) -> MorawetzReport:
    """Check the localized Morawetz inequality and the escaped-energy bound per radius.

    Violations are flagged in the report (``violations``), never raised.
    """
    rows = []
    slack = tol * abs(E)
    for term, key in zip(ledger.terms(), ledger.key_estimate_rhs()):
        residual = E - term.total
        margin = float(key) - term.exterior_morawetz
        rows.append(
            MorawetzRow(
                R=term.R,
                terms=term,
                residual=residual,
                key_rhs=float(key),
                key_margin=margin,
                ok_inequality=residual >= -slack,
                ok_key=margin >= -slack,
            )
        )
    return MorawetzReport(E, tol, rows)


@dataclass
class DecayFit:
    radii: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    max_scaled: float  # max_R M(R) R^kappa / I(0)


def decay_fit(
    ledger: Ledger,
    params: ModelParams,
    I0: float,
    r_min: float = 0.0,
    r_hi: float = math.inf,
) -> DecayFit:
    """Least-squares slope of log M(R) against log R, M the exterior Morawetz term."""
    terms = ledger.terms()
    R = np.array([t.R for t in terms])
    M = np.array([t.exterior_morawetz for t in terms])
    sel = (R >= r_min) & (R <= r_hi)
    R, M = R[sel], M[sel]
    if not np.any(M > 0.0):
        raise LedgerError("no exterior signal: every exterior Morawetz integral is zero")
    pos = M > 0.0
    if pos.sum() < 4:
        raise LedgerError(f"decay fit needs at least 4 radii with signal, have {int(pos.sum())}")
    R, M = R[pos], M[pos]
    slope, intercept = np.polyfit(np.log(R), np.log(M), 1)
    scaled = M * R**params.kappa / I0 if I0 > 0.0 else np.full_like(M, math.inf)
    return DecayFit(R, M, float(slope), float(intercept), float(scaled.max()))


@dataclass
class L2p2Report:
    total: float
    windows: List[tuple]  # (a, b, fraction of total)

    @property
    def last_window_fraction(self) -> float:
        return self.windows[-1][2] if self.windows else 0.0


def dyadic_windows(T: float, shortest: float = 1.0) -> List[float]:
    """Edges 0 < ... < T/4 < T/2 < T, halving from T until below ``shortest``."""
    edges = [T]
    while edges[-1] / 2.0 >= shortest:
        edges.append(edges[-1] / 2.0)
    edges.append(0.0)
    return edges[::-1]


def l2p2_report(ledger: Ledger, T: Optional[float] = None) -> L2p2Report:
    """Total of int int |u|^(2(p-1)) and its split over dyadic |t| windows ending at T."""
    T = ledger.t_max if T is None else T
    total = ledger.l2p2
    if T <= 0.0:
        return L2p2Report(total, [])
    edges = dyadic_windows(T)
    windows = []
    for a, b in zip(edges[:-1], edges[1:]):
        part = ledger.l2p2_window(a, b)
        windows.append((a, b, part / total if total > 0.0 else 0.0))
    return L2p2Report(total, windows)


# --- scattering ------------------------------------------------------------------


@dataclass
class ScatterRecord:
    times: np.ndarray
    pulled_back: List[RadialState]
    delta: np.ndarray  # delta[j, k] = |S(-T_j)u(T_j) - S(-T_k)u(T_k)| in H^1 x L^2

    def consecutive(self) -> np.ndarray:
        return np.array([self.delta[k, k + 1] for k in range(len(self.times) - 1)])

    @property
    def strictly_decreasing(self) -> bool:
        d = self.consecutive()
        return bool(np.all(np.diff(d) < 0.0))


def boundary_contaminated(state: RadialState, rel_tol: float = 1e-8) -> bool:
    """True when the outer 5% of the mesh carries signal above rel_tol of the peak."""
    g = state.grid
    peak = max(float(np.abs(state.w).max()), float(np.abs(state.v).max()))
    if peak == 0.0:
        return False
    edge = g.r > g.r_max * 0.95
    outer = max(float(np.abs(state.w[edge]).max()), float(np.abs(state.v[edge]).max()))
    return outer > rel_tol * peak


def scatter_extract(
    snapshots: Sequence[RadialState],
    propagator: Callable[[RadialState, float], RadialState] = free_evolve,
) -> ScatterRecord:
    """Pull each snapshot back with the free flow and tabulate Cauchy differences."""
    snaps = sorted(snapshots, key=lambda s: abs(s.t))
    for s in snaps:
        if boundary_contaminated(s):
            raise LedgerError(f"snapshot at t={s.t:g} carries signal at the outer boundary")
    pulled = [propagator(s, -s.t) for s in snaps]
    m = len(pulled)
    delta = np.zeros((m, m))
    for j in range(m):
        for k in range(j + 1, m):
            delta[j, k] = delta[k, j] = math.sqrt(energy_norm_sq(pulled[j] - pulled[k]))
    return ScatterRecord(np.array([s.t for s in snaps]), pulled, delta)
