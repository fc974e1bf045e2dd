"""Run configuration, presets and experiment orchestration.

A run evolves the sampled data forward (and, for two-sided runs, backward)
to |t| = T_max with a :class:`~morawetz_lab.ledger.Ledger` and a
:class:`Recorder` attached, then evaluates every check that applies and
writes ``timeseries.csv``, ``report.json`` and ``manifest.json``.
"""
from __future__ import annotations

import concurrent.futures as cf
import copy
import csv
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from . import functionals as fn
from .field import (
    FOUR_PI,
    DataFamily,
    DataKind,
    FieldError,
    ModelParams,
    RadialState,
    WeightKind,
    critical_kappa_exact,
    critical_regularity_exact,
    make_grid,
    sample_data,
)
from .ledger import (
    DEFAULT_RADII,
    Ledger,
    LedgerError,
    _cumulative_at,
    decay_fit,
    l2p2_report,
    morawetz_report,
    scatter_extract,
)
from .linear_prop import free_evolve
from .stepper import StepperConfig, StepperError, evolve, signal_radius

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# acceptance tolerances
ENERGY_DRIFT_TOL = 1e-4
ESCAPE_STEP_TOL = 1e-6  # relative to I(0), per step
MORAWETZ_TOL = 1e-2  # relative to E
DECAY_SLACK = 0.3
DECAY_RADII = (2.0, 16.0)
L2P2_LAST_WINDOW_TOL = 0.05
CONFORMAL_TOL = 1e-2
CONFORMAL_WINDOW = (1.0, 10.0)


class ConfigError(ValueError):
    """A run configuration violates a precondition."""


@dataclass
class RunConfig:
    preset: str = "custom"
    p: float = 4.0
    kappa: float = 3.0 / 7.0
    weight_kind: str = WeightKind.POW_R.value
    r_max: float = 40.0
    n: int = 4001
    cfl_lambda: float = 0.5
    T_max: float = 20.0
    nonlinear: bool = True
    two_sided: bool = True
    data_kind: str = DataKind.GAUSSIAN_BUMP.value
    amplitude: float = 1.0
    scale: float = 1.0
    gamma: Optional[float] = None
    offset: float = 2.0
    taper: float = 0.0
    radii: Optional[List[float]] = None  # None -> dyadic {1..16} inside (0, r_max - T_max)
    cadence: int = 10
    track_conformal: bool = False
    snapshots: List[float] = field(default_factory=list)
    allow_boundary: bool = False
    out_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        d = self.to_dict()
        d.update(kw)
        return RunConfig.from_dict(d)

    # -- derived objects ---------------------------------------------------------

    def params(self) -> ModelParams:
        return ModelParams(self.p, self.kappa, WeightKind(self.weight_kind))

    def grid(self):
        return make_grid(self.r_max, int(self.n))

    def family(self) -> DataFamily:
        return DataFamily(
            DataKind(self.data_kind), self.amplitude, self.scale, self.gamma, self.offset, self.taper
        )

    def stepper(self) -> StepperConfig:
        return StepperConfig(self.cfl_lambda, nonlinear=self.nonlinear)

    def tracked_radii(self) -> List[float]:
        if self.radii is None:
            return [R for R in DEFAULT_RADII if R < self.r_max - self.T_max]
        return [float(R) for R in self.radii]

    def validate(self) -> None:
        """Check every module precondition before any compute starts."""
        try:
            params = self.params()
            self.grid()
            fam = self.family()
            fam.check_admissible(params)
            self.stepper()
        except (FieldError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not (self.T_max >= 0.0 and math.isfinite(self.T_max)):
            raise ConfigError(f"T_max={self.T_max} must be finite and >= 0")
        if int(self.cadence) < 1:
            raise ConfigError("cadence must be >= 1")
        reach = fam.support_radius() + self.T_max
        if reach > self.r_max and not self.allow_boundary:
            raise ConfigError(
                f"signal reaches the outer boundary: support {fam.support_radius():g} + T_max "
                f"{self.T_max:g} > r_max {self.r_max:g}; set allow_boundary to acknowledge"
            )
        for R in self.tracked_radii():
            if not (0.0 < R < self.r_max):
                raise ConfigError(f"tracked radius {R} outside (0, r_max)")
            if R >= self.r_max - self.T_max and not self.allow_boundary:
                raise ConfigError(f"tracked radius {R} not clear of the boundary (r_max - T_max)")
        for T in self.snapshots:
            if not (0.0 < T <= self.T_max):
                raise ConfigError(f"snapshot time {T} outside (0, T_max]")


PRESETS: Dict[str, Dict[str, Any]] = {
    # localized Morawetz inequality and the escaped-energy bound
    "morawetz": dict(data_kind="gaussian", amplitude=1.0, scale=1.0, T_max=20.0),
    # exterior decay law on admissible tail data; the tail is cut smoothly
    # before r_max, so the run acknowledges boundary reach
    "decay": dict(
        data_kind="power_tail", gamma=2.5, taper=8.0, kappa=3.0 / 7.0, T_max=20.0, allow_boundary=True
    ),
    "scatter": dict(
        data_kind="gaussian", amplitude=2.0, scale=2.0, T_max=40.0, r_max=60.0, n=6001,
        snapshots=[2.0, 4.0, 8.0, 16.0],
    ),
    "conformal": dict(
        data_kind="gaussian", amplitude=2.0, scale=3.0, T_max=10.5, two_sided=False,
        cadence=1, track_conformal=True, radii=[],
    ),
    "linear-oracle": dict(
        data_kind="compact", amplitude=1.0, scale=2.0, nonlinear=False, T_max=10.0, r_max=20.0, n=2001,
        radii=[1.0, 2.0, 4.0, 8.0],
    ),
    "convergence": dict(
        data_kind="compact", amplitude=1.0, scale=2.0, T_max=8.0, r_max=20.0, n=1001,
        radii=[1.0, 2.0, 4.0, 8.0],
    ),
    "zero": dict(data_kind="gaussian", amplitude=0.0, T_max=5.0),
}


def preset_config(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    d.setdefault("preset", name)
    return RunConfig.from_dict(d)


# --- per-step functionals ---------------------------------------------------------------


class Recorder:
    """Observer evaluating the instantaneous functionals of one run.

    I(t) is evaluated after every step (for the monotonicity check); the full
    row of functionals every ``cadence`` steps.  ``conformal`` only marks the
    rows for the conformal-law analysis; Q is recorded either way.
    """

    def __init__(self, params: ModelParams, radii: Sequence[float], I0: float,
                 cadence: int = 10, conformal: bool = False, snapshots: Sequence[float] = ()):
        self.params = params
        self.radii = np.asarray(radii, dtype=float)
        self.I0 = I0
        self.cadence = int(cadence)
        self.conformal = conformal
        self.snapshot_times = list(snapshots)
        self.snapshots: Dict[float, RadialState] = {}
        self.rows: List[Dict[str, float]] = []
        self.I_series: List[float] = []
        self.max_step_increase = -math.inf
        self.escape_chain_max = 0.0
        self._count = 0
        self._last: Optional[RadialState] = None

    def __call__(self, state: RadialState, t: float, dt: float) -> None:
        I = fn.weighted_energy(state, t, self.params)
        if dt != 0.0 and self.I_series:
            self.max_step_increase = max(self.max_step_increase, I - self.I_series[-1])
        self.I_series.append(I)
        for T in self.snapshot_times:
            if abs(abs(t) - T) <= 0.25 * abs(dt) or (dt == 0.0 and T == abs(t)):
                self.snapshots[T] = state
        if self._count % self.cadence == 0:
            self._row(state, t, I)
        self._count += 1
        self._last = state

    def finish(self) -> None:
        s = self._last
        if s is not None and (not self.rows or self.rows[-1]["t"] != s.t):
            self._row(s, s.t, self.I_series[-1])

    def _row(self, state: RadialState, t: float, I: float) -> None:
        P = self.params
        e = fn.energy(state, P)
        row = {
            "t": t,
            "E": e.total,
            "E_grad": e.gradient,
            "E_kin": e.kinetic,
            "E_pot": e.potential,
            "I_t": I,
            "ratio_L51": fn.pointwise_decay_ratio(state, P),
        }
        q = fn.conformal_charge(state, t, P)
        row.update(Q0=q.q0, Q1=q.q1, dQdt_pred=fn.conformal_rate(state, t, P))
        if self.radii.size:
            rho = fn.energy_density(state, P)
            inner, total = _cumulative_at(rho, state.grid, self.radii)
            ext = FOUR_PI * (total - inner)
            shift = 1.0 if P.weight_kind is WeightKind.POW_ONE_PLUS_R else 0.0
            for R, val in zip(self.radii, ext):
                row[f"exterior_E_at_{R:g}"] = float(val)
                gap = R - abs(t)
                if gap > 0.0 and self.I0 > 0.0:
                    bound = (gap + shift) ** (-P.kappa) * self.I0
                    self.escape_chain_max = max(self.escape_chain_max, float(val) / bound)
        self.rows.append(row)


# --- single run --------------------------------------------------------------------------


@dataclass
class RunManifest:
    config: Dict[str, Any]
    report: Dict[str, Any]
    steps: int
    wall_seconds: float
    schema_version: int = SCHEMA_VERSION
    discarded_tail: Optional[Dict[str, float]] = None
    files: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check(value, tol, passed) -> Dict[str, Any]:
    return {"value": _jsonable(value), "tol": tol, "pass": bool(passed)}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def discarded_tail(cfg: RunConfig, state0: RadialState) -> Optional[Dict[str, float]]:
    """Weighted energy of the untruncated tail profile missing from the sampled data."""
    fam, P = cfg.family(), cfg.params()
    if fam.kind is not DataKind.POWER_TAIL:
        return None
    A, g, p = fam.amplitude, fam.gamma, P.p

    def density(r):
        u = A * (1.0 + r * r) ** (-0.5 * g)
        ur = -A * g * r * (1.0 + r * r) ** (-0.5 * g - 1.0)
        return FOUR_PI * r * r * (0.5 * ur * ur + abs(u) ** (p + 1.0) / (p + 1.0))

    full_E = integrate.quad(density, 0.0, math.inf, limit=400)[0]
    full_I = integrate.quad(lambda r: float(P.weight(r)) * density(r), 0.0, math.inf, limit=400)[0]
    E_s = fn.energy(state0, P).total
    I_s = fn.weighted_energy(state0, 0.0, P)
    return {
        "full_energy": full_E,
        "sampled_energy": E_s,
        "discarded_energy": full_E - E_s,
        "full_weighted_energy": full_I,
        "sampled_weighted_energy": I_s,
        "discarded_weighted_energy": full_I - I_s,
    }


def _conformal_residual(rows: List[Dict[str, float]]) -> Dict[str, Any]:
    rows = sorted(rows, key=lambda r: r["t"])
    t = np.array([r["t"] for r in rows])
    Q = np.array([r["Q0"] + r["Q1"] for r in rows])
    pred = np.array([r["dQdt_pred"] for r in rows])
    if t.size < 3:
        return {}
    dQ = (Q[2:] - Q[:-2]) / (t[2:] - t[:-2])
    tc, pc = t[1:-1], pred[1:-1]
    lo, hi = CONFORMAL_WINDOW
    m = (np.abs(tc) >= lo) & (np.abs(tc) <= hi) & (pc != 0.0)
    rel = np.abs(dQ[m] - pc[m]) / np.abs(pc[m]) if m.any() else np.array([])
    pos = t > 0
    inc = np.diff(Q[pos])
    neg = t < 0
    dec = np.diff(Q[neg])
    return {
        "max_rel_residual": float(rel.max()) if rel.size else math.nan,
        "t_worst": float(tc[m][rel.argmax()]) if rel.size else math.nan,
        "points": int(rel.size),
        "max_increase_t_pos": float(inc.max()) if inc.size else 0.0,
        # mirror: Q is nondecreasing in t for t < 0
        "max_decrease_t_neg": float(-dec.min()) if dec.size else 0.0,
    }


def run_experiment(config: RunConfig, write: bool = True) -> RunManifest:
    """Execute one configured run; forward and (optionally) backward evolutions."""
    config.validate()
    t_start = time.perf_counter()
    P, g, fam, scfg = config.params(), config.grid(), config.family(), config.stepper()
    radii = config.tracked_radii()
    state0 = sample_data(fam, g, P)

    def total_energy(state):
        e = fn.energy(state, P)
        # the free equation conserves only the quadratic part
        return e.total if config.nonlinear else e.gradient + e.kinetic

    E0 = total_energy(state0)
    I0 = fn.weighted_energy(state0, 0.0, P)

    directions = [1.0, -1.0] if config.two_sided else [1.0]
    ledger: Optional[Ledger] = None
    recorders, finals = [], {}
    steps = 0
    for sgn in directions:
        led = Ledger(g, P, radii)
        rec = Recorder(P, radii, I0, config.cadence, config.track_conformal, config.snapshots)
        with warnings.catch_warnings():
            if config.allow_boundary:
                warnings.simplefilter("ignore")
            final = evolve(state0, sgn * config.T_max, scfg, P, [led, rec], config.allow_boundary)
        rec.finish()
        steps += len(rec.I_series) - 1
        ledger = led if ledger is None else ledger.merge(led)
        recorders.append(rec)
        finals[sgn] = final

    report: Dict[str, Any] = {
        "p": P.p,
        "kappa": P.kappa,
        "kappa_p": P.kappa_critical,
        "kappa_p_exact": str(critical_kappa_exact(config.p)),
        "s_p": P.s_p,
        "s_p_exact": str(critical_regularity_exact(config.p)),
        "kappa_above_threshold": P.above_threshold,
        "E0": E0,
        "I0": I0,
        "tracked_radii": radii,
    }
    checks: Dict[str, Any] = {}

    # energy
    drift_final = max(abs(total_energy(s) - E0) for s in finals.values())
    rows = [r for rec in recorders for r in rec.rows]
    row_E = [r["E"] if config.nonlinear else r["E_grad"] + r["E_kin"] for r in rows]
    drift_max = max(abs(e - E0) for e in row_E)
    if E0 > 0.0:
        drift_final /= E0
        drift_max /= E0
    report["energy"] = {"drift_final": drift_final, "drift_max": drift_max}
    if E0 > 0.0:
        checks["energy_drift"] = _check(drift_final, ENERGY_DRIFT_TOL, drift_final <= ENERGY_DRIFT_TOL)

    # escaping energy
    step_inc = max(rec.max_step_increase for rec in recorders)
    I_max = max(max(rec.I_series) for rec in recorders)
    esc = {
        "max_step_increase_rel": step_inc / I0 if I0 > 0 else 0.0,
        "max_over_I0": I_max / I0 if I0 > 0 else 0.0,
        "escape_chain_max_ratio": max(rec.escape_chain_max for rec in recorders),
    }
    report["escape"] = esc
    if I0 > 0.0:
        checks["escape_monotone"] = _check(
            esc["max_step_increase_rel"], ESCAPE_STEP_TOL, esc["max_step_increase_rel"] <= ESCAPE_STEP_TOL
        )
        checks["escape_bounded"] = _check(esc["max_over_I0"], 1.0 + ESCAPE_STEP_TOL,
                                          esc["max_over_I0"] <= 1.0 + ESCAPE_STEP_TOL)
        checks["escape_chain"] = _check(esc["escape_chain_max_ratio"], 1.0, esc["escape_chain_max_ratio"] <= 1.0)

    # Morawetz and escaped-energy average
    if radii:
        mr = morawetz_report(ledger, E0, MORAWETZ_TOL)
        report["morawetz"] = [
            {
                "R": row.R,
                **{k: v for k, v in asdict(row.terms).items() if k != "R"},
                "sum": row.terms.total,
                "residual_32": row.residual,
                "key_estimate_rhs": row.key_rhs,
                "key_margin": row.key_margin,
            }
            for row in mr.rows
        ]
        report["morawetz_violations"] = mr.violations
        worst_res = min(row.residual for row in mr.rows)
        worst_key = min(row.key_margin for row in mr.rows)
        if config.two_sided:
            checks["morawetz_32"] = _check(worst_res, -MORAWETZ_TOL * E0, worst_res >= -MORAWETZ_TOL * E0)
            checks["key_estimate_33"] = _check(worst_key, -MORAWETZ_TOL * E0, worst_key >= -MORAWETZ_TOL * E0)
        try:
            fit = decay_fit(ledger, P, I0, *DECAY_RADII)
            report["decay"] = {
                "radii": fit.radii,
                "exterior_morawetz": fit.values,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "max_scaled": fit.max_scaled,
            }
            bound = -P.kappa + DECAY_SLACK
            checks["decay_slope"] = _check(fit.slope, bound, fit.slope <= bound and math.isfinite(fit.max_scaled))
        except LedgerError as exc:
            report["decay"] = {"error": str(exc)}

    # scattering size
    l2 = l2p2_report(ledger, config.T_max)
    report["l2p2"] = {"total": l2.total, "windows": l2.windows, "last_window_fraction": l2.last_window_fraction}
    if l2.total > 0.0 and config.T_max >= 2.0:
        checks["l2p2_saturation"] = _check(
            l2.last_window_fraction, L2P2_LAST_WINDOW_TOL, l2.last_window_fraction <= L2P2_LAST_WINDOW_TOL
        )

    # pointwise bound
    sup_ratio = max(r["ratio_L51"] for r in rows)
    C = fn.lemma_constant(P.p)
    report["lemma"] = {"sup_ratio": sup_ratio, "constant_bound": C}
    checks["lemma_bound"] = _check(sup_ratio, C, sup_ratio <= C)

    if config.track_conformal:
        conf = {}
        for sgn, rec in zip(directions, recorders):
            conf["forward" if sgn > 0 else "backward"] = _conformal_residual(rec.rows)
        report["conformal"] = conf
        fw = conf["forward"]
        if fw and fw["points"]:
            checks["conformal_law"] = _check(fw["max_rel_residual"], CONFORMAL_TOL,
                                             fw["max_rel_residual"] <= CONFORMAL_TOL)
            checks["conformal_nonincreasing"] = _check(fw["max_increase_t_pos"], 0.0,
                                                       fw["max_increase_t_pos"] <= 0.0)

    if config.snapshots:
        sc = {}
        for sgn, rec in zip(directions, recorders):
            snaps = [rec.snapshots[T] for T in sorted(rec.snapshots)]
            try:
                record = scatter_extract(snaps)
                d = record.consecutive()
                sc["forward" if sgn > 0 else "backward"] = {
                    "times": record.times,
                    "consecutive_deltas": d,
                    "strictly_decreasing": record.strictly_decreasing,
                }
                checks[f"scatter_{'forward' if sgn > 0 else 'backward'}"] = _check(
                    d, "strictly decreasing", record.strictly_decreasing
                )
            except LedgerError as exc:
                sc["forward" if sgn > 0 else "backward"] = {"error": str(exc)}
        report["scatter"] = sc

    if not config.nonlinear:
        errs = {}
        for sgn, final in finals.items():
            exact = free_evolve(state0, final.t)
            errs["forward" if sgn > 0 else "backward"] = float(np.abs(final.w - exact.w).max())
        report["oracle"] = {"max_error": max(errs.values()), **errs, "dr": g.dr}

    report["checks"] = checks
    report = _jsonable(report)
    manifest = RunManifest(
        config=config.to_dict(),
        report=report,
        steps=steps,
        wall_seconds=time.perf_counter() - t_start,
        discarded_tail=discarded_tail(config, state0),
    )
    if write and config.out_dir:
        manifest.files = write_outputs(Path(config.out_dir), manifest, recorders)
    return manifest


TIMESERIES_BASE = ["t", "E", "E_grad", "E_kin", "E_pot", "I_t", "ratio_L51", "Q0", "Q1", "dQdt_pred"]


def write_outputs(out: Path, manifest: RunManifest, recorders: Sequence[Recorder]) -> Dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted((r for rec in recorders for r in rec.rows), key=lambda r: r["t"])
    extra = [k for k in rows[0] if k not in TIMESERIES_BASE] if rows else []
    ts_path = out / "timeseries.csv"
    with ts_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_BASE + extra)
        for r in rows:
            writer.writerow([repr(float(r[k])) for k in TIMESERIES_BASE + extra])
    report_path = out / "report.json"
    report_path.write_text(json.dumps(manifest.report, indent=2, sort_keys=True) + "\n")
    files = {"timeseries": ts_path.name, "report": report_path.name, "manifest": "manifest.json"}
    manifest.files = files
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest.to_dict()), indent=2, sort_keys=True) + "\n")
    return files


# --- refinement studies and sweeps ---------------------------------------------------


def _slope(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return math.nan
    return math.log2(abs(a) / abs(b))


def convergence_study(config: RunConfig, levels: int = 3) -> Dict[str, Any]:
    """Rerun at (dr, dt), (dr/2, dt/2), ... and tabulate observed orders.

    Errors with a known zero limit (energy drift, d'Alembert error) give
    slopes log2(e_k / e_{k+1}); other quantities give Richardson slopes
    log2(|q_k - q_{k+1}| / |q_{k+1} - q_{k+2}|).  Non-monotone sequences are
    flagged, not fatal.
    """
    if levels < 3:
        raise ConfigError("a convergence study needs at least 3 levels")
    n0 = int(config.n)
    manifests = []
    for k in range(levels):
        cfg = config.with_overrides(n=(n0 - 1) * 2**k + 1, out_dir=None, snapshots=[])
        manifests.append(run_experiment(cfg, write=False))

    def seq(getter):
        vals = []
        for m in manifests:
            try:
                vals.append(float(getter(m.report)))
            except (KeyError, TypeError, IndexError):
                return None
        return vals

    table: Dict[str, Dict[str, Any]] = {}

    def error_entry(name, vals):
        if vals is None:
            return
        slopes = [_slope(vals[k], vals[k + 1]) for k in range(len(vals) - 1)]
        ratios = [abs(vals[k]) / abs(vals[k + 1]) if vals[k + 1] else math.inf for k in range(len(vals) - 1)]
        table[name] = {"values": vals, "slopes": slopes, "ratios": ratios,
                       "monotone": all(abs(vals[k + 1]) < abs(vals[k]) for k in range(len(vals) - 1))}

    def richardson_entry(name, vals):
        if vals is None:
            return
        diffs = [vals[k] - vals[k + 1] for k in range(len(vals) - 1)]
        slopes = [_slope(diffs[k], diffs[k + 1]) for k in range(len(diffs) - 1)]
        table[name] = {"values": vals, "slopes": slopes,
                       "monotone": all(abs(diffs[k + 1]) < abs(diffs[k]) for k in range(len(diffs) - 1))}

    error_entry("energy_drift", seq(lambda r: r["energy"]["drift_final"]))
    if not config.nonlinear:
        error_entry("oracle_error", seq(lambda r: r["oracle"]["max_error"]))
    richardson_entry("I0", seq(lambda r: r["I0"]))
    radii = manifests[0].report.get("tracked_radii", [])
    for i, R in enumerate(radii):
        for term in ("interior_energy_avg", "sphere_trace", "interior_potential", "exterior_morawetz"):
            vals = seq(lambda r, i=i, term=term: r["morawetz"][i][term])
            if vals is not None and any(v != 0.0 for v in vals):
                richardson_entry(f"{term}@R={R:g}", vals)
    flagged = [k for k, v in table.items() if not v["monotone"]]
    return {
        "levels": [m.config["n"] for m in manifests],
        "dr": [config.r_max / (m.config["n"] - 1) for m in manifests],
        "table": table,
        "non_monotone": flagged,
    }


def quadrature_study(levels: int = 3, n0: int = 1001, r_max: float = 10.0) -> Dict[str, Any]:
    """Observed order of the radial quadrature on a static Gaussian energy."""
    P = ModelParams()
    vals = []
    for k in range(levels):
        g = make_grid(r_max, (n0 - 1) * 2**k + 1)
        vals.append(fn.energy(sample_data(DataFamily("gaussian"), g, P), P).total)
    diffs = [vals[k] - vals[k + 1] for k in range(levels - 1)]
    return {"values": vals, "slopes": [_slope(diffs[k], diffs[k + 1]) for k in range(levels - 2)]}


def _sweep_worker(cfg_dict: Dict[str, Any]) -> Dict[str, Any]:
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        return {"ok": True, "manifest": run_experiment(cfg).to_dict()}
    except (ConfigError, FieldError, StepperError, LedgerError, ValueError) as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}", "config": cfg_dict}


SWEEP_COLUMNS = [
    "p", "kappa", "kappa_p", "kappa_p_exact", "s_p_exact", "data_kind", "gamma",
    "E0", "I0", "energy_drift", "decay_slope", "decay_max_scaled", "l2p2_total", "lemma_sup",
]


def _sweep_row(manifest: Dict[str, Any]) -> Dict[str, Any]:
    c, r = manifest["config"], manifest["report"]
    decay = r.get("decay") or {}
    return {
        "p": c["p"],
        "kappa": c["kappa"],
        "kappa_p": r["kappa_p"],
        "kappa_p_exact": r["kappa_p_exact"],
        "s_p_exact": r["s_p_exact"],
        "data_kind": c["data_kind"],
        "gamma": c["gamma"],
        "E0": r["E0"],
        "I0": r["I0"],
        "energy_drift": r["energy"]["drift_final"],
        "decay_slope": decay.get("slope"),
        "decay_max_scaled": decay.get("max_scaled"),
        "l2p2_total": r["l2p2"]["total"],
        "lemma_sup": r["lemma"]["sup_ratio"],
    }


def sweep(configs: Sequence[RunConfig], max_workers: Optional[int] = None) -> Dict[str, Any]:
    """Run independent configurations concurrently and tabulate them side by side.

    A failing run is reported in place; the sweep itself always completes.
    """
    dicts = [c.to_dict() for c in configs]
    if max_workers is None or max_workers <= 1 or len(dicts) <= 1:
        results = [_sweep_worker(d) for d in dicts]
    else:
        with cf.ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_sweep_worker, dicts))
    rows = []
    for res in results:
        if res["ok"]:
            rows.append({"status": "ok", **_sweep_row(res["manifest"])})
        else:
            rows.append({"status": "failed", "error": res["error"], "p": res["config"]["p"],
                         "kappa": res["config"]["kappa"]})
    return {"columns": ["status"] + SWEEP_COLUMNS, "rows": rows, "results": results,
            "partial": any(not r["ok"] for r in results)}


def write_sweep_table(table: Dict[str, Any], path: Path) -> None:
    cols = table["columns"]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols + ["error"], extrasaction="ignore")
        writer.writeheader()
        for row in table["rows"]:
            writer.writerow(row)
