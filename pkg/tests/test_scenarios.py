import math

import numpy as np
import pytest

from endex import model
from endex.continuation import solve_steady
from endex.numerics import Trajectory
from endex.params import ParameterError, si_unit, default_params
from endex.scenarios import (
    REGISTRY,
    ScenarioSpec,
    Sweep,
    TimedChange,
    endex_inlet_sweep,
    execute,
    hysteresis_scan,
    level_crossing,
    regime_survey,
    run_scenario,
    settling_time,
    shutdown_ramp,
    solids_interruption,
    standalone_sweep,
    startup,
    value_at,
    wall_coupling_sweep,
)
from endex.continuation import trace_branch
from oracles import CoupledOracle, standalone_steady

P = default_params()

# steady temperatures at Lex = 10 kW/K, computed by continuation and confirmed
# against the independent one-dimensional reduction to 1e-6 K
WALL_PROBE = {
    "Fs_20_tau2_30_tau1_10": (1098.1234793396775, 1090.897032812261),
    "Fs_20_tau2_30_tau1_15": (1090.2196064861691, 1083.392379785921),
    "Fs_40_tau2_30_tau1_15": (1088.7417217854552, 1084.5949820466717),
    "Fs_40_tau2_30_tau1_20": (1078.8574398228056, 1074.9822578848493),
}


@pytest.fixture(scope="module")
def wall():
    return wall_coupling_sweep()


# -- registry --------------------------------------------------------------


def test_registry_options_have_si_units():
    for name, entry in REGISTRY.items():
        for opt, unit in entry.options.items():
            if unit is not None:
                base = opt.split("_")[0] if opt not in ("T1_in", "Ts_in", "pc_in_floor") else opt
                assert isinstance(unit, str) and unit, (name, opt)
                if base in ("tau1", "tau2", "Fs", "Lex"):
                    assert unit == si_unit(base), (name, opt)


def test_unknown_scenario_and_option():
    with pytest.raises(ParameterError, match="unknown scenario"):
        run_scenario("nope")
    with pytest.raises(ParameterError, match="unknown option"):
        run_scenario("startup", colour=1)


def test_runs_are_deterministic():
    a = run_scenario("sorbent_flow_compare")
    b = run_scenario("sorbent_flow_compare")
    assert a.metrics == b.metrics
    for ra, rb in zip(a.runs, b.runs):
        np.testing.assert_array_equal(ra.branch.states(), rb.branch.states())
        np.testing.assert_array_equal(ra.branch.param_values(), rb.branch.param_values())


# -- helpers ---------------------------------------------------------------


def _traj(times, states):
    return Trajectory(np.asarray(times, float), np.asarray(states, float), [])


def test_settling_time_interpolates_last_exit():
    t = [0.0, 1.0, 2.0, 3.0, 4.0]
    x = [[1.0], [0.5], [0.02], [0.2], [0.0]]
    # last sample above 0.1 is t = 3 (0.2), next is 0 -> crossing at 3.5
    assert settling_time(_traj(t, x), [0.0], [1.0], 0.1) == pytest.approx(3.5)


def test_settling_time_edge_cases():
    assert settling_time(_traj([0, 1], [[0.0], [0.0]]), [0.0], [1.0], 0.1) == 0.0
    assert settling_time(_traj([0, 1], [[0.0], [1.0]]), [0.0], [1.0], 0.1) == math.inf


def test_settling_time_component_subset():
    tr = _traj([0, 1, 2], [[1.0, 5.0], [0.0, 5.0], [0.0, 5.0]])
    assert settling_time(tr, [0.0, 0.0], [1.0, 1.0], 0.5, components=[0]) == pytest.approx(0.5)
    assert settling_time(tr, [0.0, 0.0], [1.0, 1.0], 0.5) == math.inf


def test_level_crossing_refines_between_records():
    Q = P.with_values(Fs=10.0, T1_in=1060.0, Ts_in=1021.0)
    b = trace_branch(Q, "tau1", (0.1, 20.0), mode="standalone")
    level = 0.5 * (b.column("c1")[0] + b.column("c1")[-1])
    tau = level_crossing(b, "c1", level)
    assert b.param_values()[0] < tau < b.param_values()[-1]
    ref = standalone_steady(Q.with_values(tau1=tau))
    assert ref[0]["c1"] == pytest.approx(level, rel=1e-8)
    assert level_crossing(b, "c1", 1e6) is None


def test_value_at_outside_branch():
    b = trace_branch(P, "tau1", (5.0, 6.0))
    with pytest.raises(ValueError):
        value_at(b, 7.0, "T1")


# -- campaigns -------------------------------------------------------------


def test_wall_probe_golden_and_oracle(wall):
    for label, (T1, T2) in WALL_PROBE.items():
        assert wall.metrics[f"T1_at_probe[{label}]"] == pytest.approx(T1, abs=1e-6)
        assert wall.metrics[f"T2_at_probe[{label}]"] == pytest.approx(T2, abs=1e-6)
    Q = wall.run("Fs_20_tau2_30_tau1_15").params.with_values(Lex=1e4)
    ref = CoupledOracle(Q, (700.0, 1300.0)).solve(Q.flow.T1_in)
    assert len(ref) == 1
    assert ref[0]["T1"] == pytest.approx(WALL_PROBE["Fs_20_tau2_30_tau1_15"][0], abs=1e-6)


def test_wall_gap_shrinks(wall):
    for run in wall.runs:
        assert wall.metrics[f"gap_decreasing[{run.label}]"]
        b = run.branch
        assert b.param_values()[0] == 0.0 and b.param_values()[-1] == pytest.approx(1e5)


def test_standalone_sweep_structure():
    res = standalone_sweep()
    assert [r.label for r in res.runs] == ["Fs_10", "Fs_20", "Fs_30", "Fs_40"]
    assert all(r.mode == "standalone" for r in res.runs)
    assert isinstance(res.metrics["p1_above_p1_eq_everywhere"], bool)
    for r in res.runs:
        rec = r.branch.records[len(r.branch) // 2]
        ref = standalone_steady(r.params.with_values(tau1=rec.param_value))
        assert rec.state[1] == pytest.approx(ref[0]["T1"], rel=1e-9)


def test_inlet_sweep_decouples_without_flow_or_wall():
    res = endex_inlet_sweep(Fs=0.0, Lex=0.0, tau2_values=(30.0,))
    assert res.notes and all(r.mode == "standalone" for r in res.runs)
    b = res.runs[0].branch
    Q = res.runs[0].params
    for r in b.records[:: max(len(b) // 4, 1)]:
        ref = standalone_steady(Q.with_values(T1_in=r.param_value))
        assert r.state[1] == pytest.approx(ref[0]["T1"], rel=1e-9)


def test_startup_reaches_steady_state():
    res = startup(tau2_values=(10.0,), t_end=400.0, sample_dt=0.5)
    run = res.runs[0]
    ss = solve_steady(run.params).state
    scale = model.state_scale(run.params, "endex")
    assert run.trajectory.states[0, 0] == 0.0 and run.trajectory.states[0, 2] == 0.0
    t1 = res.metrics["t_full_1pct[tau2_10]"]
    t5 = res.metrics["t_carboniser_5pct[tau2_10]"]
    assert 0 < t5 < t1 < 400.0
    d = np.linalg.norm((run.trajectory.states - ss) / scale, axis=1)
    assert np.all(d[run.trajectory.times > t1 + 1e-9] < 0.01)


def test_shutdown_descends_from_nominal():
    res = shutdown_ramp()
    b = res.runs[0].branch
    pc = b.param_values()
    assert pc[0] == pytest.approx(P.flow.pc_in) and pc[-1] == pytest.approx(100.0)
    assert res.metrics["p2_monotone"]
    assert 100.0 <= res.metrics["knee_pc_in"] <= P.flow.pc_in


def test_solids_interruption_switches_flow():
    res = solids_interruption(Lex_values=(0.0, 1e4), t_end=300.0)
    for run in res.runs:
        assert run.trajectory.event_log[0][0] == pytest.approx(100.0)
        T1 = run.trajectory.states[:, 1]
        pre = run.trajectory.times < 100.0
        assert np.ptp(T1[pre]) < 1e-6
    assert res.metrics["excursion_K[Lex_0]"] > res.metrics["excursion_K[Lex_10000]"] > 0
    assert res.metrics["adiabatic_rise_K"] == pytest.approx(model.adiabatic_rise(P))


def test_hysteresis_jump_lands_on_upper_branch():
    m = hysteresis_scan(P.with_values(kappa=6.0)).metrics
    assert m["folds"] == 2 and m["states_between_folds"] == 3
    assert m["jump_final_T1"] == pytest.approx(m["upper_branch_T1_past_A"], abs=1e-4)


def test_hysteresis_without_folds():
    m = hysteresis_scan().metrics
    assert m["folds"] == 0 and "states_between_folds" not in m


def test_small_regime_survey():
    kw = dict(axis_points=2, T1_in_range=(1000.0, 1100.0))
    res = regime_survey(**kw)
    rows = res.tables["cases"]
    assert len(rows) == 16 == res.metrics["cases"]
    assert res.metrics["failed_cases"] == 0
    assert res.metrics["records"] == sum(r["records"] for r in rows)
    assert {r["tau1"] for r in rows} == {0.1, 20.0}
    par = regime_survey(jobs=2, **kw).tables["cases"]
    for a, b in zip(rows, par):
        assert a.keys() == b.keys()
        for k in a:
            assert a[k] == b[k] or (a[k] != a[k] and b[k] != b[k]), k


# -- custom specifications -------------------------------------------------


def test_execute_two_parameter_sweep():
    spec = ScenarioSpec("custom", sweep=(Sweep("T1_in", 1000.0, 1100.0, 20), Sweep("Fs", 10.0, 30.0, 3)))
    res = execute(spec)
    assert [r.label for r in res.runs] == ["Fs_10", "Fs_20", "Fs_30"]
    assert res.runs[1].params.flow.Fs == 20.0


def test_execute_trajectory_with_event():
    spec = ScenarioSpec(
        "step", output_kind="trajectory", t_end=50.0, sample_dt=5.0,
        events=(TimedChange(10.0, "Lex", 1e4),),
    )
    tr = execute(spec).runs[0].trajectory
    assert tr.times[-1] == pytest.approx(50.0)
    assert [e[1].split(":")[0] for e in tr.event_log] == ["Lex"]


@pytest.mark.parametrize("kw", [
    dict(output_kind="branch"),
    dict(output_kind="nope", sweep=Sweep("Fs", 1.0, 2.0)),
    dict(output_kind="trajectory", t_end=0.0),
    dict(sweep=Sweep("Fs", 1.0, 2.0), events=(TimedChange(1.0, "Fs", 0.0),)),
    dict(sweep=Sweep("Fs", 1.0, 2.0), overrides=(("tau1", -1.0),)),
])
def test_spec_validation(kw):
    with pytest.raises(ParameterError):
        ScenarioSpec("bad", **kw)


def test_sweep_validation():
    with pytest.raises(ParameterError):
        Sweep("Fs", 2.0, 1.0)
    with pytest.raises(ParameterError):
        Sweep("C1", 1.0, 2.0)
    with pytest.raises(ParameterError):
        Sweep("Fs", 1.0, 2.0, start="mid")
