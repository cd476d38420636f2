import json
import os

import numpy as np
import pytest

from ivboot.cli import run


BASE = ["--n", "60", "--q", "3", "--concentration", "3000", "--reps", "25",
        "--boot-reps", "120", "--seed", "11"]


def test_help_lists_flags(capsys):
    assert run(["power", "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--reps", "--boot-reps", "--alpha", "--seed", "--error",
                 "--concentration", "--n", "--q", "--grid", "--out", "--format"):
        assert flag in text
    assert run(["reproduce-table", "--help"]) == 0
    assert "--table" in capsys.readouterr().out


def test_simulate_csv_deterministic(tmp_path):
    f1 = tmp_path / "a.csv"
    f2 = tmp_path / "b.csv"
    argv = ["simulate"] + BASE
    assert run(argv + ["--out", str(f1)]) == 0
    assert run(argv + ["--out", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()
    header = f1.read_text().splitlines()[0]
    assert header == "y1,y2,z1,z2,z3"
    assert len(f1.read_text().splitlines()) == 61


def test_power_csv_shape(tmp_path):
    out = tmp_path / "p.csv"
    code = run(["power", "--grid", "0.8:0.2:1.2"] + BASE + ["--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "offset,LR,BLR,CLR,AR,LM"
    assert len(lines) == 4
    vals = np.array([line.split(",")[1:] for line in lines[1:]], dtype=float)
    assert np.all((0 <= vals) & (vals <= 1))


def test_power_identical_across_thread_env(tmp_path, monkeypatch):
    argv = ["power", "--grid", "0.8:0.2:1.2"] + BASE
    f1 = tmp_path / "t1.csv"
    monkeypatch.setenv("IVBOOT_THREADS", "1")
    assert run(argv + ["--out", str(f1)]) == 0
    f2 = tmp_path / "t2.csv"
    monkeypatch.setenv("IVBOOT_THREADS", "3")
    assert run(argv + ["--out", str(f2)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_power_json_format(tmp_path):
    out = tmp_path / "p.json"
    assert run(["power", "--grid", "0.9:0.2:1.1"] + BASE + ["--format", "json",
                "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["rows"].keys() == {"LR", "BLR", "CLR", "AR", "LM"}
    assert payload["config"]["master_seed"] == 11


def test_test_subcommand_emits_all_five(tmp_path):
    out = tmp_path / "t.json"
    assert run(["test", "--beta0", "1.0"] + BASE + ["--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    names = [t["name"] for t in payload["tests"]]
    assert names == ["LR", "BLR", "CLR", "AR", "LM"]
    for t in payload["tests"]:
        assert isinstance(t["reject"], bool)
        assert np.isfinite(t["statistic"])
        assert np.isfinite(t["critical_value"])


def test_missing_config_exits_one(capsys):
    assert run(["power", "--config", "missing.json"]) == 1
    assert "error:" in capsys.readouterr().err


def test_bad_grid_exits_one(capsys):
    assert run(["power", "--grid", "oops"] + BASE) == 1
    assert "error:" in capsys.readouterr().err


def test_config_file_with_flag_overrides(tmp_path):
    cfg = {"n": 60, "q": 3, "concentration": 3000.0, "beta_star": 1.0,
           "error": {"kind": "laplace"}, "beta_grid": [1.0],
           "reps": 10, "boot_reps": 100, "alpha": 0.05, "master_seed": 4}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o.json"
    assert run(["power", "--config", str(path), "--reps", "15",
                "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["config"]["error_kind"] == "laplace"
    assert payload["reps_used"] == 15


def test_diagnose_json(tmp_path):
    out = tmp_path / "d.json"
    assert run(["diagnose"] + BASE + ["--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert "fsc" in payload
    assert "deviation_function_junctions" in payload
    assert payload["bernstein_domination"]["dominated"] is True


def test_reproduce_table_small_run(tmp_path):
    out = tmp_path / "r.json"
    code = run(["reproduce-table", "--table", "1", "--reps", "60",
                "--boot-reps", "120", "--seed", "5", "--format", "json",
                "--out", str(out)])
    assert code in (0, 2)  # tolerance verdict is noisy at tiny reps
    payload = json.loads(out.read_text())
    assert payload["report"]["reference_id"] == 1
    assert len(payload["table"]["grid"]) == 17
    assert (code == 0) == payload["report"]["passed"]
