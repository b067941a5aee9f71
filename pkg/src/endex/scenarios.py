"""Named steady-state and transient campaigns on the Endex model.

Every campaign takes an optional base parameter set (Table-1 style defaults
when omitted) and applies its own operating point on top as overrides, so
the shared defaults are never mutated.  Campaign functions return a
:class:`ScenarioResult` holding one :class:`Run` per branch or trajectory
plus a flat dictionary of headline metrics.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import model
from .continuation import (
    NEWTON_TOL,
    Branch,
    ParamRef,
    SteadyStateRecord,
    StepControl,
    solutions_at,
    solve_on_branch,
    solve_steady,
    trace_branch,
)
from .numerics import Event, Trajectory, integrate
from .params import ModelParams, ParameterError, default_params

KINDS = ("branch", "trajectory", "quasistatic")


@dataclass(frozen=True)
class Tolerances:
    newton: float = NEWTON_TOL
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if not (self.newton > 0 and self.rtol > 0 and self.atol > 0):
            raise ParameterError("tolerances must be positive")


DEFAULT_TOLERANCES = Tolerances()


# -- generic specification -------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    """Parameter range for a branch; *points* sets the initial step as range/points."""

    param: str
    lo: float
    hi: float
    points: int = 200
    start: str = "lo"

    def __post_init__(self):
        ParamRef(self.param)
        if not self.lo <= self.hi:
            raise ParameterError(f"sweep range ({self.lo}, {self.hi}) is empty")
        if self.points < 1:
            raise ParameterError("sweep needs at least one point")
        if self.start not in ("lo", "hi"):
            raise ParameterError(f"sweep start must be 'lo' or 'hi', got {self.start!r}")


@dataclass(frozen=True)
class TimedChange:
    time: float
    param: str
    value: float

    def __post_init__(self):
        ParamRef(self.param)


@dataclass(frozen=True)
class ScenarioSpec:
    """A single custom run: one branch family or one trajectory.

    ``sweep`` is one :class:`Sweep`, or a pair whose second member is
    sampled at ``points`` evenly spaced values with one branch per value.
    """

    name: str
    base_params: ModelParams = field(default_factory=default_params)
    overrides: tuple[tuple[str, float], ...] = ()
    sweep: Sweep | tuple[Sweep, Sweep] | None = None
    events: tuple[TimedChange, ...] = ()
    mode: str = "endex"
    output_kind: str = "branch"
    t_end: float = 600.0
    sample_dt: float | None = 1.0
    initial_state: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.output_kind not in KINDS:
            raise ParameterError(f"output_kind must be one of {KINDS}")
        if self.mode not in model.MODES:
            raise ParameterError(f"mode must be one of {model.MODES}")
        if self.events and self.output_kind != "trajectory":
            raise ParameterError("events are only valid for trajectory runs")
        if self.output_kind != "trajectory" and self.sweep is None:
            raise ParameterError(f"{self.output_kind} runs need a sweep")
        if self.output_kind == "trajectory" and not self.t_end > 0:
            raise ParameterError("t_end must be positive")
        self.params  # validates override names and values

    @property
    def params(self) -> ModelParams:
        return self.base_params.with_values(**dict(self.overrides))


@dataclass
class Run:
    label: str
    params: ModelParams
    mode: str
    branch: Branch | None = None
    trajectory: Trajectory | None = None

    @property
    def kind(self) -> str:
        return "branch" if self.branch is not None else "trajectory"

    @property
    def truncated(self) -> bool:
        return bool(self.branch is not None and self.branch.truncated)


@dataclass
class ScenarioResult:
    name: str
    runs: list[Run]
    metrics: dict[str, float | int | bool | None] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    incomplete: bool = False

    @property
    def truncated(self) -> bool:
        return self.incomplete or any(r.truncated for r in self.runs)

    def run(self, label: str) -> Run:
        for r in self.runs:
            if r.label == label:
                return r
        raise KeyError(label)


def execute(spec: ScenarioSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> ScenarioResult:
    """Run a custom :class:`ScenarioSpec`."""
    P = spec.params
    if spec.output_kind == "trajectory":
        if spec.initial_state is None:
            x0 = solve_steady(P, spec.mode, tol=tolerances.newton).state
        else:
            x0 = np.asarray(spec.initial_state, dtype=float)
        traj = _integrate(P, spec.mode, x0, spec.t_end, tolerances, spec.events, spec.sample_dt)
        return ScenarioResult(spec.name, [Run("trajectory", P, spec.mode, trajectory=traj)])

    if isinstance(spec.sweep, Sweep):
        primary, values = spec.sweep, [None]
    else:
        primary, second = spec.sweep
        values = list(np.linspace(second.lo, second.hi, second.points))
    runs = []
    for v in values:
        Pv = P if v is None else P.with_values(**{second.param: v})
        label = "branch" if v is None else f"{second.param}_{v:.12g}"
        b = _branch(Pv, primary.param, (primary.lo, primary.hi), spec.mode, tolerances,
                    start=primary.start, points=primary.points)
        runs.append(Run(label, Pv, spec.mode, branch=b))
    return ScenarioResult(spec.name, runs)


# -- shared helpers --------------------------------------------------------


def _base(P: ModelParams | None) -> ModelParams:
    return default_params() if P is None else P


def _branch(P, param, rng, mode, tolerances, start="lo", points=200) -> Branch:
    return trace_branch(
        P, param, rng, mode=mode, start=start, tol=tolerances.newton,
        step=StepControl(initial=1.0 / points),
    )


def _integrate(P, mode, x0, t_end, tolerances, changes=(), sample_dt=None) -> Trajectory:
    events = [Event(c.time, c.param, c.value) for c in changes]
    return integrate(
        model.rhs_for(mode), x0, (0.0, t_end), tol=(tolerances.rtol, tolerances.atol),
        events=events, params=P, nonnegative=model.nonnegative_components(mode),
        sample_dt=sample_dt,
    )


def _label(**kv) -> str:
    return "_".join(f"{k}_{v:g}" for k, v in kv.items())


def record_value(rec: SteadyStateRecord, key: str) -> float:
    names = ("c1", "T1", "c2", "T2")
    if key in names:
        i = names.index(key)
        return float(rec.state[i]) if i < rec.state.size else math.nan
    return float(rec.derived[key])


def level_crossing(b: Branch, key: str, level: float) -> float | None:
    """First parameter value along *b* at which *key* reaches *level*.

    The bracketing pair of records is refined with Brent's method, each
    function value coming from a Newton solve on the branch.
    """
    vals = b.column(key)
    for i in range(len(vals) - 1):
        ga, gb = vals[i] - level, vals[i + 1] - level
        if ga == 0:
            return float(b.records[i].param_value)
        if ga * gb > 0:
            continue
        ra, rb = b.records[i], b.records[i + 1]
        a, c = ra.param_value, rb.param_value

        def g(mu):
            w = (mu - a) / (c - a)
            guess = (1 - w) * ra.state + w * rb.state
            return record_value(solve_on_branch(b, mu, guess), key) - level

        span = abs(c - a)
        return float(brentq(g, a, c, xtol=1e-12 * max(span, 1.0), rtol=1e-12))
    return None


def value_at(b: Branch, mu: float, key: str) -> float:
    """*key* on the first solution of *b* at parameter *mu*."""
    sols = solutions_at(b, mu)
    if not sols:
        raise ValueError(f"branch does not reach {b.param_name} = {mu}")
    return record_value(sols[0], key)


def settling_time(
    traj: Trajectory, target: Sequence[float], scale: Sequence[float], threshold: float,
    components: Sequence[int] | None = None,
) -> float:
    """Earliest time after which the scaled distance to *target* stays below *threshold*.

    Returns ``inf`` if the trajectory ends outside the threshold.  Crossings
    are located by linear interpolation between output samples.
    """
    idx = list(range(traj.states.shape[1])) if components is None else list(components)
    target = np.asarray(target, dtype=float)[idx]
    scale = np.asarray(scale, dtype=float)[idx]
    d = np.linalg.norm((traj.states[:, idx] - target) / scale, axis=1)
    above = np.nonzero(d >= threshold)[0]
    if above.size == 0:
        return float(traj.times[0])
    k = above[-1]
    if k == len(d) - 1:
        return math.inf
    t0, t1, d0, d1 = traj.times[k], traj.times[k + 1], d[k], d[k + 1]
    return float(t0 + (d0 - threshold) / (d0 - d1) * (t1 - t0))


def adiabatic_rise_report(P: ModelParams | None = None) -> dict[str, float]:
    """Temperature rise for full conversion of the inlet CO2 against the gas heat capacity."""
    P = _base(P)
    return {"c1_in": P.flow.c1_in, "adiabatic_rise_K": model.adiabatic_rise(P)}


# -- campaigns -------------------------------------------------------------


def standalone_sweep(
    P: ModelParams | None = None,
    Fs_values: Sequence[float] = (10.0, 20.0, 30.0, 40.0),
    tau1_range: tuple[float, float] = (0.1, 20.0),
    T1_in: float = 1060.0,
    Ts_in: float = 1021.0,
    c1_level: float = 7.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Standalone carboniser against gas residence time, one branch per solids flow.

    Metrics give the residence time at which ``c1`` falls to *c1_level*
    and whether ``p1 > p1_eq`` held on every record.
    """
    base = _base(P).with_values(T1_in=T1_in, Ts_in=Ts_in)
    res = ScenarioResult("standalone_sweep", [])
    all_super = True
    for Fs in Fs_values:
        Pf = base.with_values(Fs=Fs)
        b = _branch(Pf, "tau1", tau1_range, "standalone", tolerances)
        label = _label(Fs=Fs)
        res.runs.append(Run(label, Pf, "standalone", branch=b))
        res.metrics[f"tau1_at_c1_{c1_level:g}[{label}]"] = level_crossing(b, "c1", c1_level)
        all_super &= bool(np.all(b.column("p1") > b.column("p1_eq")))
    res.metrics["p1_above_p1_eq_everywhere"] = all_super
    return res


def _coupled_or_decoupled(P: ModelParams) -> str:
    # without sorbent flow or wall exchange the calciner has no heat source
    # and its temperature decays to zero; the carboniser is then exactly the
    # standalone system with Fs = 0
    return "standalone" if P.flow.Fs == 0 and P.flow.Lex == 0 else "endex"


def endex_inlet_sweep(
    P: ModelParams | None = None,
    tau2_values: Sequence[float] = (30.0, 60.0),
    tau1_values: Sequence[float] = (10.0, 15.0),
    T1_in_range: tuple[float, float] = (973.0, 1273.0),
    Fs: float = 20.0,
    Lex: float = 0.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Endex steady states against inlet gas temperature.

    One branch per ``(tau2, tau1)`` pair.  With ``Fs = Lex = 0`` the
    segments decouple and the carboniser branch is traced on its own.
    Metrics record, per ``tau2``, the largest ``T1`` difference between
    the longest and shortest ``tau1`` over a grid of inlet temperatures
    (negative means the longer residence time runs cooler throughout).
    """
    base = _base(P).with_values(Fs=Fs, Lex=Lex)
    mode = _coupled_or_decoupled(base)
    res = ScenarioResult("endex_inlet_sweep", [])
    if mode == "standalone":
        res.notes.append("Fs = Lex = 0: segments decoupled, carboniser traced alone")
    probe = np.linspace(*T1_in_range, 7)
    for tau2 in tau2_values:
        by_tau1 = {}
        for tau1 in tau1_values:
            Pt = base.with_values(tau1=tau1, tau2=tau2)
            b = _branch(Pt, "T1_in", T1_in_range, mode, tolerances)
            label = _label(tau2=tau2, tau1=tau1)
            res.runs.append(Run(label, Pt, mode, branch=b))
            res.metrics[f"all_stable[{label}]"] = bool(np.all(b.max_real_parts() < 0))
            by_tau1[tau1] = b
        if len(by_tau1) >= 2 and T1_in_range[1] > T1_in_range[0]:
            long_b, short_b = by_tau1[max(tau1_values)], by_tau1[min(tau1_values)]
            diff = [value_at(long_b, t, "T1") - value_at(short_b, t, "T1") for t in probe]
            res.metrics[f"max_T1_long_minus_short[tau2_{tau2:g}]"] = float(max(diff))
    return res


def sorbent_flow_compare(
    P: ModelParams | None = None,
    Fs_values: Sequence[float] = (10.0, 40.0),
    tau1: float = 15.0,
    tau2: float = 15.0,
    T1_in_range: tuple[float, float] = (973.0, 1273.0),
    Lex: float = 0.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Inlet-temperature branches at several solids flows, one branch each.

    Metrics give ``|T1 - T2|`` and ``p1`` at the middle of the range per flow.
    """
    base = _base(P).with_values(tau1=tau1, tau2=tau2, Lex=Lex)
    res = ScenarioResult("sorbent_flow_compare", [])
    mid = 0.5 * (T1_in_range[0] + T1_in_range[1])
    for Fs in Fs_values:
        Pf = base.with_values(Fs=Fs)
        mode = _coupled_or_decoupled(Pf)
        b = _branch(Pf, "T1_in", T1_in_range, mode, tolerances)
        label = _label(Fs=Fs)
        res.runs.append(Run(label, Pf, mode, branch=b))
        if mode == "endex":
            res.metrics[f"gap_mid[{label}]"] = abs(value_at(b, mid, "T1") - value_at(b, mid, "T2"))
        res.metrics[f"p1_mid[{label}]"] = value_at(b, mid, "p1")
    return res


def endex_tau_sweep(
    P: ModelParams | None = None,
    Fs_values: Sequence[float] = (10.0, 20.0, 30.0, 40.0),
    tau1_range: tuple[float, float] = (0.1, 20.0),
    tau2: float = 30.0,
    Lex: float = 0.0,
    uptake: float = 0.9,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Endex steady states against carboniser residence time.

    Metrics: residence time at which conversion first reaches *uptake*,
    and the conversion gained between ``tau1 = 15`` and ``20`` s.
    """
    base = _base(P).with_values(tau2=tau2, Lex=Lex)
    res = ScenarioResult("endex_tau_sweep", [])
    for Fs in Fs_values:
        Pf = base.with_values(Fs=Fs)
        b = _branch(Pf, "tau1", tau1_range, "endex", tolerances)
        label = _label(Fs=Fs)
        res.runs.append(Run(label, Pf, "endex", branch=b))
        res.metrics[f"tau1_at_uptake_{uptake:g}[{label}]"] = level_crossing(b, "conversion", uptake)
        if tau1_range[0] <= 15.0 and tau1_range[1] >= 20.0:
            gain = value_at(b, 20.0, "conversion") - value_at(b, 15.0, "conversion")
            res.metrics[f"conversion_gain_15_to_20[{label}]"] = gain
    return res


WALL_CONFIGS: tuple[tuple[float, float, float], ...] = (
    # (Fs, tau2, tau1)
    (20.0, 30.0, 10.0),
    (20.0, 30.0, 15.0),
    (40.0, 30.0, 15.0),
    (40.0, 30.0, 20.0),
)


def wall_coupling_sweep(
    P: ModelParams | None = None,
    Lex_range: tuple[float, float] = (0.0, 1e5),
    configs: Sequence[tuple[float, float, float]] = WALL_CONFIGS,
    Lex_probe: float = 1e4,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Steady states against the wall heat-exchange coefficient.

    *configs* lists ``(Fs, tau2, tau1)`` operating points.  Metrics give
    ``T1`` and ``T2`` at *Lex_probe* and whether the temperature gap falls
    monotonically along each branch.
    """
    res = ScenarioResult("wall_coupling_sweep", [])
    for Fs, tau2, tau1 in configs:
        Pc = _base(P).with_values(Fs=Fs, tau2=tau2, tau1=tau1)
        b = _branch(Pc, "Lex", Lex_range, "endex", tolerances)
        label = _label(Fs=Fs, tau2=tau2, tau1=tau1)
        res.runs.append(Run(label, Pc, "endex", branch=b))
        gap = np.abs(b.column("T1") - b.column("T2"))
        res.metrics[f"gap_decreasing[{label}]"] = bool(np.all(np.diff(gap) < 0))
        if Lex_range[0] <= Lex_probe <= Lex_range[1]:
            res.metrics[f"T1_at_probe[{label}]"] = value_at(b, Lex_probe, "T1")
            res.metrics[f"T2_at_probe[{label}]"] = value_at(b, Lex_probe, "T2")
    return res


def startup(
    P: ModelParams | None = None,
    tau2_values: Sequence[float] = (10.0, 60.0),
    tau1: float = 15.0,
    Fs: float = 20.0,
    Lex: float = 0.0,
    t_end: float = 300.0,
    sample_dt: float = 0.05,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Start-up from zero CO2 in both segments at the steady temperatures.

    Metrics give the time after which the full state stays within 1 % of
    the steady state, and the same for the carboniser pair at 5 %, both in
    the scaled norm.
    """
    res = ScenarioResult("startup", [])
    for tau2 in tau2_values:
        Pt = _base(P).with_values(tau1=tau1, tau2=tau2, Fs=Fs, Lex=Lex)
        ss = solve_steady(Pt, "endex", tol=tolerances.newton).state
        x0 = np.array([0.0, ss[1], 0.0, ss[3]])
        traj = _integrate(Pt, "endex", x0, t_end, tolerances, sample_dt=sample_dt)
        label = _label(tau2=tau2)
        res.runs.append(Run(label, Pt, "endex", trajectory=traj))
        scale = model.state_scale(Pt, "endex")
        res.metrics[f"steady_T1[{label}]"] = float(ss[1])
        res.metrics[f"steady_T2[{label}]"] = float(ss[3])
        res.metrics[f"t_full_1pct[{label}]"] = settling_time(traj, ss, scale, 0.01)
        res.metrics[f"t_carboniser_5pct[{label}]"] = settling_time(
            traj, ss, scale, 0.05, components=(0, 1)
        )
    return res


def shutdown_ramp(
    P: ModelParams | None = None,
    pc_in_floor: float = 100.0,
    tau1: float = 15.0,
    tau2: float = 15.0,
    Fs: float = 20.0,
    T1_in: float = 1060.0,
    Lex: float = 0.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Quasistatic reduction of the inlet CO2 pressure from its nominal value.

    Realised as continuation in ``pc_in`` starting at the nominal end.
    Metrics: the ``pc_in`` of steepest ``|dp1/dpc_in|`` and the number of
    singular points met on the way down.
    """
    base = _base(P).with_values(tau1=tau1, tau2=tau2, Fs=Fs, T1_in=T1_in, Lex=Lex)
    nominal = base.flow.pc_in
    b = _branch(base, "pc_in", (pc_in_floor, nominal), "endex", tolerances, start="hi")
    res = ScenarioResult("shutdown_ramp", [Run("pc_in_descending", base, "endex", branch=b)])
    pc, p1 = b.param_values(), b.column("p1")
    if len(b) >= 3:
        slope = np.gradient(p1, pc)
        res.metrics["knee_pc_in"] = float(pc[int(np.argmax(np.abs(slope)))])
    res.metrics["singular_points"] = len(b.singular_points)
    res.metrics["p2_monotone"] = bool(np.all(np.diff(b.column("p2")) <= 0))
    return res


def solids_interruption(
    P: ModelParams | None = None,
    Lex_values: Sequence[float] = (0.0, 1e3, 5e3, 1e4),
    switch_time: float = 100.0,
    Fs_before: float = 40.0,
    Fs_after: float = 0.0,
    tau1: float = 15.0,
    tau2: float = 15.0,
    T1_in: float = 1060.0,
    t_end: float = 600.0,
    sample_dt: float = 0.5,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Steady operation interrupted by a step change of the solids flow.

    Metrics per wall coefficient: the ``T1`` excursion above the pre-event
    steady state and the delay of its peak after the switch.
    """
    res = ScenarioResult("solids_interruption", [])
    res.metrics.update(adiabatic_rise_report(P))
    for Lex in Lex_values:
        Pl = _base(P).with_values(Fs=Fs_before, Lex=Lex, tau1=tau1, tau2=tau2, T1_in=T1_in)
        ss = solve_steady(Pl, "endex", tol=tolerances.newton).state
        traj = _integrate(
            Pl, "endex", ss, t_end, tolerances,
            (TimedChange(switch_time, "Fs", Fs_after),), sample_dt,
        )
        label = _label(Lex=Lex)
        res.runs.append(Run(label, Pl, "endex", trajectory=traj))
        T1 = traj.states[:, 1]
        k = int(np.argmax(T1))
        res.metrics[f"T1_before[{label}]"] = float(ss[1])
        res.metrics[f"excursion_K[{label}]"] = float(T1[k] - ss[1])
        res.metrics[f"peak_delay_s[{label}]"] = float(traj.times[k] - switch_time)
        res.metrics[f"peak_is_interior[{label}]"] = bool(k < len(T1) - 1)
    return res


def hysteresis_scan(
    P: ModelParams | None = None,
    T1_in_range: tuple[float, float] = (473.0, 1100.0),
    Fs: float = 5.0,
    tau1: float = 2.4,
    tau2: float = 15.0,
    Lex: float = 0.0,
    jump_offset: float = 1.0,
    jump_time: float = 1e5,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Inlet-temperature branch at low solids flow, where multiplicity may occur.

    Folds are labelled in the order met from the cold end: ``A`` where
    the lower branch ends (ignition) and ``B`` where the upper branch ends
    (extinction).  When both exist, the metrics include the number of
    steady states midway between them, how many of those are unstable, and
    the outcome of a transient started on the lower branch just past ``A``.
    Just past a fold the transient lingers near the vanished pair of states,
    so the default *jump_time* is long.
    """
    base = _base(P).with_values(Fs=Fs, tau1=tau1, tau2=tau2, Lex=Lex)
    b = _branch(base, "T1_in", T1_in_range, "endex", tolerances)
    folds = b.folds()
    for sp, name in zip(folds, "AB"):
        sp.label = name
    res = ScenarioResult("hysteresis_scan", [Run("T1_in", base, "endex", branch=b)])
    res.metrics["folds"] = len(folds)
    res.metrics["hopfs"] = len(b.hopfs())
    for sp in folds[:2]:
        res.metrics[f"fold_{sp.label}_T1_in"] = sp.param_value
    if len(folds) == 2:
        a, c = folds[0].param_value, folds[1].param_value
        sols = solutions_at(b, 0.5 * (a + c))
        res.metrics["states_between_folds"] = len(sols)
        res.metrics["unstable_between_folds"] = sum(not s.stability.stable for s in sols)
        upper = max(record_value(s, "T1") for s in sols) if sols else math.nan
        mu = a + jump_offset
        Pj = base.with_values(T1_in=mu)
        traj = _integrate(Pj, "endex", folds[0].state, jump_time, tolerances)
        hot = max((record_value(s, "T1") for s in solutions_at(b, mu)), default=math.nan)
        res.metrics["jump_final_T1"] = float(traj.final[1])
        res.metrics["upper_branch_T1_past_A"] = hot
        res.metrics["upper_branch_T1_mid"] = upper
        res.runs.append(Run("ignition_jump", Pj, "endex", trajectory=traj))
    return res


@dataclass(frozen=True)
class RegimeCase:
    """Summary of one inlet-temperature branch of the regime survey."""

    tau1: float
    Fs: float
    tau2: float
    Lex: float
    records: int = 0
    truncated: bool = False
    error: str = ""
    sign_violations: int = 0
    carboniser_violations: int = 0
    calciner_violations: int = 0
    first_violation_T1_in: float = math.nan
    unstable_records: int = 0
    max_real_part: float = math.nan
    folds: int = 0
    hopfs: int = 0


def _survey_case(base: ModelParams, combo, T1_in_range, points, tolerances) -> RegimeCase:
    tau1, Fs, tau2, Lex = combo
    P = base.with_values(tau1=tau1, Fs=Fs, tau2=tau2, Lex=Lex)
    try:
        b = _branch(P, "T1_in", T1_in_range, "endex", tolerances, points=points)
    except Exception as exc:  # reported per case, never fatal for the survey
        return RegimeCase(*combo, error=f"{type(exc).__name__}: {exc}")
    off1 = [not r.derived["p1"] > r.derived["p1_eq"] for r in b.records]
    off2 = [not r.derived["p2"] < r.derived["p2_eq"] for r in b.records]
    bad = [r for r, a, c in zip(b.records, off1, off2) if a or c]
    return RegimeCase(
        *combo,
        records=len(b),
        truncated=b.truncated,
        sign_violations=len(bad),
        carboniser_violations=sum(off1),
        calciner_violations=sum(off2),
        first_violation_T1_in=min((r.param_value for r in bad), default=math.nan),
        unstable_records=sum(not r.stability.stable for r in b.records),
        max_real_part=float(b.max_real_parts().max()),
        folds=len(b.folds()),
        hopfs=len(b.hopfs()),
    )


def regime_survey(
    P: ModelParams | None = None,
    axis_points: int = 5,
    T1_in_range: tuple[float, float] = (973.0, 1273.0),
    tau1_range: tuple[float, float] = (0.1, 20.0),
    Fs_range: tuple[float, float] = (10.0, 40.0),
    tau2_range: tuple[float, float] = (15.0, 60.0),
    Lex_range: tuple[float, float] = (0.0, 1e5),
    capacity_factor: float = 1.0,
    jobs: int | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ScenarioResult:
    """Inlet-temperature branches over a grid of the other four operating parameters.

    The residence times, solids flow and wall conductance are each sampled
    at *axis_points* evenly spaced values; along each grid point the inlet
    temperature is continued over *T1_in_range*, which visits it far more
    densely than the grid.  *capacity_factor* multiplies both segment heat
    capacities.  Cases are independent, so ``jobs > 1`` spreads them over
    worker processes.

    The result holds no branch runs.  One row per case is kept in
    ``tables["cases"]`` and the metrics aggregate them.
    """
    axis_points = int(axis_points)
    jobs = None if jobs is None else int(jobs)
    base = _base(P)
    if capacity_factor != 1.0:
        base = base.with_values(C1=base.get("C1") * capacity_factor,
                                C2=base.get("C2") * capacity_factor)
    axes = [np.linspace(*r, axis_points) for r in (tau1_range, Fs_range, tau2_range, Lex_range)]
    combos = [tuple(float(v) for v in c) for c in itertools.product(*axes)]
    args = (itertools.repeat(base), combos, itertools.repeat(T1_in_range),
            itertools.repeat(axis_points), itertools.repeat(tolerances))
    if jobs is not None and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cases = list(pool.map(_survey_case, *args, chunksize=4))
    else:
        cases = list(map(_survey_case, *args))

    ok = [c for c in cases if not c.error]
    res = ScenarioResult("regime_survey", [], tables={"cases": [asdict(c) for c in cases]})
    res.incomplete = len(ok) < len(cases) or any(c.truncated for c in cases)
    m = res.metrics
    m["cases"] = len(cases)
    m["failed_cases"] = len(cases) - len(ok)
    m["truncated_cases"] = sum(c.truncated for c in cases)
    m["records"] = sum(c.records for c in ok)
    m["sign_violations"] = sum(c.sign_violations for c in ok)
    m["cases_with_sign_violations"] = sum(c.sign_violations > 0 for c in ok)
    m["carboniser_violations"] = sum(c.carboniser_violations for c in ok)
    m["calciner_violations"] = sum(c.calciner_violations for c in ok)
    m["unstable_records"] = sum(c.unstable_records for c in ok)
    m["max_real_part"] = max((c.max_real_part for c in ok), default=math.nan)
    m["folds"] = sum(c.folds for c in ok)
    m["hopfs"] = sum(c.hopfs for c in ok)
    m["capacity_factor"] = capacity_factor
    return res


@dataclass(frozen=True)
class ScenarioEntry:
    """A campaign and the SI units of its keyword options (None: dimensionless)."""

    func: Callable[..., ScenarioResult]
    options: dict[str, str | None]


REGISTRY: dict[str, ScenarioEntry] = {
    "standalone_sweep": ScenarioEntry(
        standalone_sweep,
        {"Fs_values": "kg/s", "tau1_range": "s", "T1_in": "K", "Ts_in": "K",
         "c1_level": "mol/m^3"},
    ),
    "endex_inlet_sweep": ScenarioEntry(
        endex_inlet_sweep,
        {"tau2_values": "s", "tau1_values": "s", "T1_in_range": "K",
         "Fs": "kg/s", "Lex": "W/K"},
    ),
    "sorbent_flow_compare": ScenarioEntry(
        sorbent_flow_compare,
        {"Fs_values": "kg/s", "tau1": "s", "tau2": "s", "T1_in_range": "K",
         "Lex": "W/K"},
    ),
    "endex_tau_sweep": ScenarioEntry(
        endex_tau_sweep,
        {"Fs_values": "kg/s", "tau1_range": "s", "tau2": "s", "Lex": "W/K",
         "uptake": None},
    ),
    "wall_coupling_sweep": ScenarioEntry(
        wall_coupling_sweep, {"Lex_range": "W/K", "Lex_probe": "W/K"}
    ),
    "startup": ScenarioEntry(
        startup,
        {"tau2_values": "s", "tau1": "s", "Fs": "kg/s", "Lex": "W/K", "t_end": "s",
         "sample_dt": "s"},
    ),
    "shutdown_ramp": ScenarioEntry(
        shutdown_ramp,
        {"pc_in_floor": "Pa", "tau1": "s", "tau2": "s", "Fs": "kg/s",
         "T1_in": "K", "Lex": "W/K"},
    ),
    "solids_interruption": ScenarioEntry(
        solids_interruption,
        {"Lex_values": "W/K", "switch_time": "s", "Fs_before": "kg/s", "Fs_after": "kg/s",
         "tau1": "s", "tau2": "s", "T1_in": "K", "t_end": "s",
         "sample_dt": "s"},
    ),
    "hysteresis_scan": ScenarioEntry(
        hysteresis_scan,
        {"T1_in_range": "K", "Fs": "kg/s", "tau1": "s", "tau2": "s", "Lex": "W/K",
         "jump_offset": "K", "jump_time": "s"},
    ),
    "regime_survey": ScenarioEntry(
        regime_survey,
        {"axis_points": None, "T1_in_range": "K", "tau1_range": "s", "Fs_range": "kg/s",
         "tau2_range": "s", "Lex_range": "W/K", "capacity_factor": None, "jobs": None},
    ),
}


def run_scenario(
    name: str,
    P: ModelParams | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    **options,
) -> ScenarioResult:
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise ParameterError(
            f"unknown scenario {name!r}; available: {', '.join(REGISTRY)}"
        ) from None
    unknown = set(options) - set(entry.options)
    if unknown:
        raise ParameterError(f"unknown option(s) for {name}: {', '.join(sorted(unknown))}")
    return entry.func(P, tolerances=tolerances, **options)
