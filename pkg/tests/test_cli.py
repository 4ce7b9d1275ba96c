import json
from pathlib import Path

import pytest

from vrjp_bench.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    return main([str(a) for a in argv])


def test_vrjp_config_passes(tmp_path):
    out = tmp_path / "r.json"
    assert run("run", "--config", CONFIGS / "vrjp_k3.json", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "pass"
    assert rep["result"]["checks"]["exchangeability"]["max_abs_log_gap"] < 1e-9


def test_counterexample_names_failing_check(tmp_path):
    out = tmp_path / "r.json"
    assert run("characterize", "--model", CONFIGS / "counter_power.json", "--pairs", 200, "--out", out) == 1
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "fail"
    assert "lambda" in rep["result"]["failed"]


def test_malformed_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("run", "--config", bad) == 2


@pytest.mark.parametrize("patch", [
    {"schema_version": 2},
    {"rates": {"kind": "quartic"}},
    {"graph": {"vertices": 2, "edges": [[0, 5]]}},
    {"surprise": True},
])
def test_schema_and_model_errors(tmp_path, patch):
    cfg = json.loads((CONFIGS / "vrjp_k3.json").read_text())
    cfg.update(patch)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run("run", "--config", path) == 2


def test_missing_file():
    assert run("exchangeability", "--config", "/nonexistent/cfg.json") == 2


def test_canonicalize_writes_loadable_model(tmp_path):
    out = tmp_path / "vrjp.json"
    assert run("canonicalize", "--model", CONFIGS / "linear_k3.json", "--pairs", 100, "--out", out) == 0
    model = json.loads(out.read_text())
    assert model["canonical"]["scales"] == [2.0, 2.0, 2.0]
    assert all(w == 4.0 for _, _, w in model["rates"]["weights"])
    rep = tmp_path / "c.json"
    assert run("characterize", "--model", out, "--pairs", 100, "--out", rep) == 0


def test_canonicalize_not_reducible(tmp_path):
    cfg = json.loads((CONFIGS / "linear_k3.json").read_text())
    cfg["rates"]["edges"] = [[2, 1, 1.0, 3.0]]
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "r.json"
    assert run("canonicalize", "--model", path, "--out", out) == 1
    assert "error" in json.loads(out.read_text())


def test_simulate_then_density(tmp_path):
    traj = tmp_path / "t.jsonl"
    assert run("simulate", "--config", CONFIGS / "simulate_k3.json", "--trials", 5, "--out", traj) == 0
    assert len(traj.read_text().splitlines()) == 5
    table = tmp_path / "d.csv"
    assert run("density", "--traj", traj, "--model", CONFIGS / "simulate_k3.json", "--breakdown",
               "--out", table) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "trajectory,clock,log_product,integral_tilde,integral_hat,log_density"
    assert len(lines) == 6
    for row in lines[1:]:
        _, clock, prod, tilde, hat, total = row.split(",")
        assert clock == "Y"
        assert float(prod) - float(tilde) - float(hat) == pytest.approx(float(total), abs=1e-12)


def test_freedman_table(tmp_path):
    out, table = tmp_path / "f.json", tmp_path / "f.csv"
    assert run("freedman", "--config", CONFIGS / "freedman_k3.json", "--trials", 20_000,
               "--out", out, "--table", table) == 0
    assert table.read_text().startswith("h,p_first,se_first,p_second,se_second,z,verdict")


def test_events_command(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("run", "--config", CONFIGS / "events_k3.json", "--trials", 50_000) == 0
    rep = json.loads((tmp_path / "events_report.json").read_text())
    assert rep["result"]["checked"] == 5
    assert (tmp_path / "events_table.csv").exists()


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run("run", "--config", CONFIGS / "counter_asymmetric.json", "--pairs", 100, "--out", path) == 1
    assert a.read_bytes() == b.read_bytes()
