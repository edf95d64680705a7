import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rvzhomotopy import config, results
from rvzhomotopy.cli import main, parse_grid, parse_seeds
from rvzhomotopy.sim import HISTORY_COLUMNS, ConfigError, ScenarioConfig


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- run ------------------------------------------------------------------------

def test_run_open_fuel_schema(tmp_path):
    assert main(["run", "--variant", "open_fuel", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert {"delta_v", "terminal_miss", "fuel_penalty_pct", "solve_success_rate"} <= set(summary)
    assert all(isinstance(v, float) for v in summary.values())
    assert summary["fuel_penalty_pct"] == 0.0
    header, data = results.read_history(tmp_path / "history.csv")
    assert header == list(HISTORY_COLUMNS)
    assert data.shape == (801, len(HISTORY_COLUMNS))


def test_run_seed_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "--seed", "7", "--out", str(out)]) == 0
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()
    sa, sb = (json.loads((d / "summary.json").read_text()) for d in (a, b))
    wall_clock = {"solve_time_mean", "solve_time_max"}
    assert {k: v for k, v in sa.items() if k not in wall_clock} == \
        {k: v for k, v in sb.items() if k not in wall_clock}


def test_run_penalty_against_same_invocation_baseline(tmp_path, capsys):
    assert main(["run", "--variant", "mtf_adaptive", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    expected = (s["total_delta_v"] / s["fuel_baseline_delta_v"] - 1.0) * 100.0
    assert s["fuel_penalty_pct"] == pytest.approx(expected, rel=1e-12)
    line = capsys.readouterr().out
    assert line.startswith("mtf_adaptive:") and "penalty=" in line and "success=" in line


def test_defaults_file_reproduces_default_run(tmp_path):
    scen = tmp_path / "defaults.yaml"
    scen.write_text(config.dump_scenario(ScenarioConfig()))
    assert main(["run", "--scenario", str(scen), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "history.csv").read_bytes() == (tmp_path / "b" / "history.csv").read_bytes()


def test_history_csv_round_trip(tmp_path):
    from rvzhomotopy.sim import run

    m = run(ScenarioConfig(controller="open_energy"))
    results.write_history(tmp_path / "h.csv", m)
    _, data = results.read_history(tmp_path / "h.csv")
    np.testing.assert_array_equal(data, m.history)


# --- compare --------------------------------------------------------------------

def test_compare_five_rows(tmp_path, capsys):
    assert main(["compare", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "comparison.csv")
    assert [r["variant"] for r in rows] == ["open_energy", "open_fuel", "kf_fixed_eps",
                                            "mtfkf_fixed_eps", "mtf_adaptive"]
    assert float(rows[-1]["solve_success_rate"]) == 1.0
    assert (tmp_path / "comparison.txt").read_text().startswith("variant")
    assert "mtf_adaptive" in capsys.readouterr().out


def test_compare_twenty_seeds_adds_mean_std(tmp_path):
    args = ["compare", "--variants", "open_energy,open_fuel", "--seeds", "0:20", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = read_csv(tmp_path / "comparison.csv")
    assert len(rows) == 2
    for col in ("terminal_miss_mean", "terminal_miss_std", "total_delta_v_mean", "total_delta_v_std"):
        assert col in rows[0]
    assert len(read_csv(tmp_path / "runs.csv")) == 40


def test_compare_needs_two_variants(tmp_path):
    assert main(["compare", "--variants", "open_fuel", "--out", str(tmp_path)]) == 2


# --- sweep ----------------------------------------------------------------------

def test_sweep_fixed_eps_open_fuel(tmp_path):
    args = ["sweep", "--variant", "open_fuel", "--param", "fixed_eps", "--values", "1e-3,0.1,0.5,1.0",
            "--out", str(tmp_path)]
    assert main(args) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    ok = [r for r in rows if r["failed"] == "0"]
    assert len(ok) == 4
    eps = [float(r["value"]) for r in ok]
    dv = [float(r["total_delta_v"]) for r in ok]
    order = np.argsort(eps)
    assert np.all(np.diff(np.array(dv)[order]) >= 0.0)


def test_sweep_beta_zero_pins_eps(tmp_path):
    args = ["sweep", "--param", "scheduler.beta", "--values", "0,0.25", "--out", str(tmp_path)]
    assert main(args) == 0
    # the per-run history is not written by sweep; rerun the beta=0 point directly
    assert main(["run", "--set", "scheduler.beta=0", "--out", str(tmp_path / "b0")]) == 0
    _, data = results.read_history(tmp_path / "b0" / "history.csv")
    assert np.all(data[:, HISTORY_COLUMNS.index("eps")] == 0.0)


def test_sweep_seeds(tmp_path):
    args = ["sweep", "--variant", "open_energy", "--param", "seed", "--linspace", "0,9,10",
            "--out", str(tmp_path)]
    assert main(args) == 0
    assert len(read_csv(tmp_path / "sweep.csv")) == 10


def test_sweep_marks_failed_points(tmp_path):
    args = ["sweep", "--variant", "open_fuel", "--param", "max_iters", "--values", "1,50",
            "--out", str(tmp_path)]
    assert main(args) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert [r["failed"] for r in rows] == ["1", "0"]


def test_sweep_unknown_parameter_lists_valid(tmp_path, capsys):
    assert main(["sweep", "--param", "bogus", "--values", "1", "--out", str(tmp_path)]) == 2
    assert "scheduler.beta" in capsys.readouterr().err


# --- config errors and exit codes -------------------------------------------------

def test_unknown_key_rejected(tmp_path, capsys):
    scen = tmp_path / "bad.yaml"
    scen.write_text("scenario:\n  tf_seconds: 800\n")
    assert main(["run", "--scenario", str(scen), "--out", str(tmp_path)]) == 2
    assert "tf_seconds" in capsys.readouterr().err


def test_yaml_syntax_error_reports_line(tmp_path, capsys):
    scen = tmp_path / "bad.yaml"
    scen.write_text("scenario:\n  tf_s: 800\n  dt_s: [1\n")
    assert main(["run", "--scenario", str(scen), "--out", str(tmp_path)]) == 2
    assert "line" in capsys.readouterr().err


@pytest.mark.parametrize("override", ["scenario.tf_s=abc", "scenario.tf_s=800.5", "nope=1", "anomaly.axes=[1,2]"])
def test_bad_overrides(tmp_path, override):
    assert main(["run", "--set", override, "--out", str(tmp_path)]) == 2


def test_missing_scenario_file(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2


def test_run_failure_exit_code(tmp_path, capsys):
    assert main(["run", "--variant", "open_fuel", "--set", "max_iters=1", "--out", str(tmp_path)]) == 3
    assert "open-loop solve" in capsys.readouterr().err


def test_parsers():
    assert parse_seeds("0:3,7") == [0, 1, 2, 7]
    with pytest.raises(ConfigError):
        parse_seeds(",")
    assert parse_grid("1e-3,0.5,2,true", None) == [1e-3, 0.5, 2, True]
    assert parse_grid(None, "0,1,3") == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        parse_grid("1", "0,1,2")


def test_override_round_trip():
    cfg = config.load_scenario(None, ["scheduler.beta=0.5", "anomaly.bias_km=[0, 0.1, 0]", "seed=4"])
    assert cfg.sched.beta == 0.5 and cfg.anomaly.bias == (0.0, 0.1, 0.0) and cfg.seed == 4
    assert config.from_mapping(config.to_mapping(cfg)) == cfg


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "rvzhomotopy.cli", "defaults"], capture_output=True, text=True)
    assert out.returncode == 0
    assert config.from_mapping(__import__("yaml").safe_load(out.stdout)) == ScenarioConfig()
