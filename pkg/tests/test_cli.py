from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from blowup_lab.cli import main
from blowup_lab.criteria import CriterionReport, ThresholdReport
from blowup_lab.solver import SimResult


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


TRUNC = {"kind": "truncated_singular", "scale": 2.0, "cap": 10.0}


def test_thresholds_json(capsys):
    code, out, _ = run(capsys, "thresholds", "--d", "4", "--p", "3")
    assert code == 0
    data = json.loads(out)
    assert data["N_exact"] == pytest.approx(1.5958, abs=1e-4)
    assert data["morrey_norm_uC"] == pytest.approx(6.5797, abs=1e-4)
    rep = ThresholdReport.from_dict(data)
    assert rep.N_asymptotic == 2.0


def test_thresholds_domain_error(capsys):
    code, out, err = run(capsys, "thresholds", "--d", "3", "--p", "3")
    assert code == 2 and out == ""
    payload = json.loads(err)
    assert payload["error"] == "domain_error"
    assert payload["message"] == "singular solution requires p > d/(d−2)"


def test_thresholds_large_d_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "thresholds", "--d", "100", "--p", "3", "--format", "csv",
                       "--out", str(tmp_path))
    assert code == 0 and "\r" not in out
    row = next(csv.DictReader(io.StringIO(out)))
    assert 0.99 <= float(row["N_exact"]) / float(row["N_asymptotic"]) <= 1.01
    assert (tmp_path / "thresholds.csv").read_text() == out


def test_rational_p_flag(capsys):
    code, out, _ = run(capsys, "thresholds", "--d", "5", "--p", "7/3")
    assert code == 0 and json.loads(out)["p"] == pytest.approx(7 / 3)


@pytest.mark.parametrize("profile, params, verdict, divergent", [
    ({"kind": "singular", "scale": 2.0}, {"d": 4, "p": 3}, "blowup_predicted", False),
    ({"kind": "singular", "scale": 1.0}, {"d": 4, "p": 3}, "inconclusive", False),
    ({"kind": "constant", "level": 1.0}, {"d": 3, "p": 2}, "blowup_predicted", True),
])
def test_criterion_examples(capsys, tmp_path, profile, params, verdict, divergent):
    path = write_config(tmp_path, "c.json", {"params": params, "profile": profile})
    code, out, _ = run(capsys, "criterion", "--config", path)
    assert code == 0
    data = json.loads(out)
    assert data["verdict"] == verdict
    assert (data["argmax_T"] == "divergent") == divergent
    CriterionReport.from_dict(data)  # round-trips through the report parser


def test_criterion_flags_override_config(capsys, tmp_path):
    path = write_config(tmp_path, "c.json", {"params": {"d": 4, "p": 3},
                                             "profile": {"kind": "gaussian"}})
    code, out, _ = run(capsys, "criterion", "--config", path, "--d", "1", "--p", "2")
    assert code == 0 and json.loads(out)["argmax_T"] == "divergent"


def test_criterion_weighted(capsys):
    code, out, _ = run(capsys, "criterion", "--d", "3", "--p", "3", "--beta", "0", "--T", "4")
    assert code == 0
    assert json.loads(out)["weighted_criterion_bound"] == pytest.approx(8 ** -0.5, rel=1e-8)
    code, _, err = run(capsys, "criterion", "--d", "3", "--p", "2", "--beta", "5")
    assert code == 2 and json.loads(err)["error"] == "domain_error"


def test_criterion_is_deterministic(capsys, tmp_path):
    path = write_config(tmp_path, "c.json", {"params": {"d": 4, "p": 3}, "profile": TRUNC})
    outs = [run(capsys, "criterion", "--config", path)[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_simulate_zero(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": {"kind": "constant", "level": 0.0},
           "grid": {"r_max": 10.0, "n_cells": 256}, "t_max": 1.0}
    code, out, _ = run(capsys, "simulate", "--config", write_config(tmp_path, "z.json", cfg))
    data = json.loads(out)
    assert code == 0 and data["outcome"] == "survived" and data["final_sup"] == 0.0


def test_simulate_blowup_outputs(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": TRUNC, "t_max": 1.0,
           "record_every": 5e-4, "snapshot_times": [0.001, 0.002]}
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "simulate", "--config", write_config(tmp_path, "b.json", cfg),
                       "--out", str(out_dir))
    assert code == 0
    data = json.loads(out)
    assert data["outcome"] == "blew_up" and data["t_blow"] <= 1.1 * 0.006630047
    assert json.loads((out_dir / "summary.json").read_text()) == data
    assert SimResult.outcome_from_summary(data).kind == "blew_up"
    for name, header in [("series.csv", "t,W,mass_L1,sup_norm"), ("snapshots.csv", "t,r,u"),
                         ("barrier.csv", "t,barrier_max")]:
        assert (out_dir / name).read_text().splitlines()[0] == header


def test_simulate_global(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": dict(TRUNC, scale=0.5),
           "grid": {"n_cells": 2048}, "t_max": 10.0, "record_every": 0.05}
    code, out, _ = run(capsys, "simulate", "--config", write_config(tmp_path, "g.json", cfg))
    data = json.loads(out)
    assert code == 0 and data["outcome"] == "survived" and data["horizon"] == 10.0
    assert data["barrier_peak"] < 0.5 * (1 + 1e-3)


def test_simulate_step_failure_exit_code(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": {"kind": "gaussian"},
           "grid": {"r_max": 10.0, "n_cells": 256}, "t_max": 0.1, "record_every": 0.1,
           "cfl_coeff": 5.0}
    code, out, err = run(capsys, "simulate", "--config", write_config(tmp_path, "f.json", cfg))
    assert code == 3
    assert json.loads(out)["outcome"] == "step_failure"
    assert json.loads(err)["error"] == "numerical_failure"


def test_bad_config_is_domain_error(capsys, tmp_path):
    for cfg in ({"params": {"d": 4, "p": 3}, "profile": {"kind": "wavelet"}},
                {"params": {"d": 4}, "profile": TRUNC},
                {"params": {"d": 4, "p": 3}, "profile": TRUNC, "grid": {"cells": 9}}):
        code, _, err = run(capsys, "simulate", "--config", write_config(tmp_path, "x.json", cfg))
        assert code == 2 and json.loads(err)["error"] == "domain_error"
    code, _, err = run(capsys, "criterion", "--config", str(tmp_path / "missing.json"))
    assert code == 2


def sweep_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_N_dichotomy(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": TRUNC, "grid": {"n_cells": 2048},
           "t_max": 5.0, "record_every": 0.05, "workers": 4,
           "sweep": {"parameter": "N", "values": [2.0, 0.5, 1.6, 0.9, 1.2]}}
    code, out, _ = run(capsys, "sweep", "--config", write_config(tmp_path, "s.json", cfg),
                       "--out", str(tmp_path))
    assert code == 0 and "\r" not in out
    rows = sweep_rows(out)
    assert [float(r["value"]) for r in rows] == [0.5, 0.9, 1.2, 1.6, 2.0]
    outcome = {float(r["value"]): r["outcome"] for r in rows}
    assert outcome[0.5] == outcome[0.9] == "survived"
    assert outcome[1.6] == outcome[2.0] == "blew_up"
    assert set(rows[0]) == {"parameter", "value", "verdict", "margin", "outcome", "time"}
    assert (tmp_path / "sweep.csv").read_text() == out


def test_sweep_caps_trend(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": TRUNC, "t_max": 1.0, "record_every": 0.01,
           "sweep": {"parameter": "H", "values": [10, 100, 1000]}}
    code, out, _ = run(capsys, "sweep", "--config", write_config(tmp_path, "h.json", cfg))
    rows = sweep_rows(out)
    assert code == 0 and all(r["outcome"] == "blew_up" for r in rows)
    t = [float(r["time"]) for r in rows]
    assert t[0] >= t[1] >= t[2]


def test_sweep_empty_and_json(capsys, tmp_path):
    cfg = {"params": {"d": 4, "p": 3}, "profile": TRUNC, "sweep": {"parameter": "N", "values": []}}
    path = write_config(tmp_path, "e.json", cfg)
    code, out, _ = run(capsys, "sweep", "--config", path)
    assert code == 0 and out == "parameter,value,verdict,margin,outcome,time\n"
    code, out, _ = run(capsys, "sweep", "--config", path, "--format", "json")
    assert code == 0 and json.loads(out) == []


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blowup_lab.cli", "thresholds", "--d", "3",
                           "--p", "3"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "singular solution requires" in json.loads(proc.stderr)["message"]
    proc = subprocess.run([sys.executable, "-m", "blowup_lab.cli", "thresholds", "--d", "4",
                           "--p", "3"], capture_output=True, text=True)
    assert proc.returncode == 0 and math.isclose(json.loads(proc.stdout)["N_asymptotic"], 2.0)
