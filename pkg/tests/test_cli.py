import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from endex import cli
from endex.config import RunConfig
from endex.continuation import StepControl, solve_steady, trace_branch
from endex.params import default_params
from endex.scenarios import Run, ScenarioResult

GOLDEN = Path(__file__).parent / "golden"


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def summary(d):
    return json.loads((d / "summary.json").read_text())


def test_steady_writes_summary(tmp_path, capsys):
    assert cli.run(["steady", "--out", str(tmp_path)]) == 0
    s = summary(tmp_path)
    ref = solve_steady(default_params()).state
    assert s["state"]["T1"] == pytest.approx(ref[1], rel=1e-11)
    assert s["stability"]["kind"] == "stable"
    assert s["provenance"]["parameters"]["Lex"]["unit"] == "W/K"
    assert "stability: stable" in capsys.readouterr().out


def test_sweep_rows_match_records(tmp_path):
    out = tmp_path / "a"
    code = cli.run(["sweep", "--param", "T1_in", "--range", "1000 K", "1100 K", "--out", str(out)])
    assert code == 0
    s = summary(out)
    (run,) = s["runs"]
    rows = read_csv(out / run["file"])
    assert len(rows) == run["rows"] == sum(run["stability_counts"].values())
    assert list(rows[0]) == list(cli.BRANCH_COLUMNS)
    assert float(rows[0]["param"]) == 1000.0 and float(rows[-1]["param"]) == 1100.0


def test_rerun_from_summary_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    args = ["--set", "Lex=5 kW/K", "--param", "tau1", "--range", "1 s", "20 s"]
    assert cli.run(["sweep", *args, "--out", str(a)]) == 0
    cfg = tmp_path / "again.yaml"
    cfg.write_text(yaml.safe_dump(summary(a)["provenance"]["config"]))
    b = tmp_path / "b"
    assert cli.run(["sweep", "--config", str(cfg), "--out", str(b)]) == 0
    f = summary(a)["runs"][0]["file"]
    assert (a / f).read_bytes() == (b / f).read_bytes()
    c = tmp_path / "c"
    assert cli.run(["sweep", *args, "--out", str(c)]) == 0
    assert (a / f).read_bytes() == (c / f).read_bytes()


def test_integrate_with_event(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "events:\n  - {time: 20 s, param: Fs, value: 0 kg/s}\n"
        "integrate:\n  t_end: 1 min\n  sample_dt: 2 s\n"
    )
    assert cli.run(["integrate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    s = summary(tmp_path)
    (run,) = s["runs"]
    rows = read_csv(tmp_path / run["file"])
    assert len(rows) == run["rows"]
    assert float(rows[-1]["t"]) == pytest.approx(60.0)
    assert run["event_log"][0]["time"] == pytest.approx(20.0)


def test_standalone_sweep_scenario_files(tmp_path):
    assert cli.run(["scenario", "standalone_sweep", "--out", str(tmp_path)]) == 0
    files = sorted(p.name for p in tmp_path.glob("branch_*.csv"))
    assert files == [f"branch_Fs_{f}.csv" for f in (10, 20, 30, 40)]
    s = summary(tmp_path)
    assert s["scenario"] == "standalone_sweep" and not s["truncated"]
    for run in s["runs"]:
        assert len(read_csv(tmp_path / run["file"])) == run["rows"]
        assert all(r["T2"] == "nan" for r in read_csv(tmp_path / run["file"]))


def test_scenario_table_output(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "scenario: regime_survey\noptions:\n  axis_points: 2\n"
        "  T1_in_range: [1000 K, 1050 K]\n"
    )
    assert cli.run(["scenario", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    s = summary(tmp_path)
    t = s["tables"]["cases"]
    rows = read_csv(tmp_path / t["file"])
    assert len(rows) == t["rows"] == 16 == s["metrics"]["cases"]
    assert {r["truncated"] for r in rows} == {"false"}


def test_multiple_scenarios_in_subdirectories(tmp_path):
    code = cli.run(["scenario", "wall_coupling_sweep", "shutdown_ramp", "--jobs", "2",
                    "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "wall_coupling_sweep" / "summary.json").exists()
    assert (tmp_path / "shutdown_ramp" / "summary.json").exists()


def test_eig_command(capsys):
    assert cli.run(["eig"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 5 and out[-1] == "stability: stable"
    assert cli.run(["eig", "--mode", "standalone", "--state", "1", "2", "3"]) == 3


def test_fold_locus_command(tmp_path):
    code = cli.run([
        "fold-locus", "--set", "kappa=6", "--set", "Fs=5 kg/s", "--set", "tau1=2.4 s",
        "--set", "tau2=15 s", "--param", "T1_in", "--range", "473 K", "1100 K",
        "--second", "Fs", "--second-range", "5 kg/s", "10 kg/s", "--out", str(tmp_path),
    ])
    assert code == 0
    rows = read_csv(tmp_path / "fold_locus.csv")
    assert list(rows[0]) == ["T1_in", "Fs"]
    gold = read_csv(GOLDEN / "fold_locus_A_kappa6.csv")
    assert len(rows) == len(gold)
    for r, g in zip(rows, gold):
        assert float(r["T1_in"]) == pytest.approx(float(g["T1_in"]), abs=1e-6)
        assert float(r["Fs"]) == pytest.approx(float(g["Fs"]), abs=1e-9)
    # without a fold there is nothing to continue
    assert cli.run(["fold-locus", "--param", "T1_in", "--range", "1000 K", "1100 K",
                    "--second", "Fs", "--second-range", "5 kg/s", "6 kg/s",
                    "--out", str(tmp_path / "x")]) == 2


@pytest.mark.parametrize("argv", [
    ["steady", "--set", "Fs=20 K"],
    ["steady", "--set", "nope=1"],
    ["steady", "--config", "/nonexistent.yaml"],
    ["sweep"],
    ["sweep", "--param", "T1_in"],
    ["sweep", "--param", "C1", "--range", "1", "2"],
    ["scenario"],
    ["scenario", "nope"],
    ["fold-locus", "--param", "T1_in", "--range", "1 K", "2 K"],
])
def test_configuration_errors_exit_3(argv, tmp_path, capsys):
    assert cli.run([*argv, "--out", str(tmp_path)]) == 3
    assert "configuration error" in capsys.readouterr().err


def test_unreachable_tolerance_exits_2(tmp_path, capsys):
    cfg = tmp_path / "t.yaml"
    cfg.write_text("tolerances:\n  newton: 1.0e-30\n")
    assert cli.run(["steady", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "solver failure" in capsys.readouterr().err


def test_truncated_result_written_and_flagged(tmp_path):
    b = trace_branch(default_params(), "T1_in", (973.0, 1273.0), step=StepControl(max_points=5))
    assert b.truncated
    res = ScenarioResult("partial", [Run("branch", default_params(), "endex", branch=b)])
    s = cli.write_result(res, RunConfig(), tmp_path, "sweep")
    assert s["truncated"] and s["runs"][0]["truncated"]
    assert len(read_csv(tmp_path / "branch.csv")) == 5
    assert cli._status(res) == cli.EXIT_SOLVER


def test_json_has_no_nan_literals(tmp_path):
    assert cli.run(["scenario", "standalone_sweep", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "summary.json").read_text()
    assert "NaN" not in text
    json.loads(text)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "endex.cli", "steady", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert np.isfinite(summary(tmp_path)["state"]["T2"])
