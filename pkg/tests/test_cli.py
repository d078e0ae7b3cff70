import json

import pytest
import yaml

from infostab.cli import EXIT_AUDIT, EXIT_CONFIG, EXIT_OK, main
from infostab.harness import load_records, read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_simulate_defaults(capsys):
    code, doc = run(capsys, "simulate", "--d", "3", "--n", "50", "--runs", "4", "--seed", "1")
    assert code == EXIT_OK
    assert doc["d"] == 3 and doc["n"] == 50 and doc["seeds"] == 4
    assert doc["bound"] == pytest.approx((2 * 3 * 50) ** 0.5)


def test_simulate_reproducible(capsys):
    a = run(capsys, "simulate", "--n", "40", "--runs", "3", "--seed", "5")[1]
    b = run(capsys, "simulate", "--n", "40", "--runs", "3", "--seed", "5")[1]
    assert a == b


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({
        "game": {"kind": "armed_bandit", "d": 2},
        "policy": {"kind": "uniform"},
        "adversary": {"kind": "bernoulli", "means": [0.2, 0.8]},
        "run": {"n": 30, "runs": 2},
        "output": {"path": str(tmp_path / "ignored.json")},
    }))
    out = tmp_path / "r.csv"
    code, doc = run(capsys, "simulate", "--config", str(cfg), "--runs", "3", "--out", str(out), "--format", "csv")
    assert code == EXIT_OK and doc["runs"] == 3
    rows = read_csv(out)
    assert len(rows) == 90 and not (tmp_path / "ignored.json").exists()


def test_simulate_then_export(tmp_path, capsys):
    rec = tmp_path / "r.json"
    assert run(capsys, "simulate", "--n", "20", "--runs", "2", "--out", str(rec))[0] == EXIT_OK
    assert len(load_records(rec)) == 2
    csv_path = tmp_path / "r.csv"
    code, doc = run(capsys, "export", "--input", str(rec), "--out", str(csv_path), "--format", "csv")
    assert code == EXIT_OK and doc["records"] == 2
    rows = read_csv(csv_path)
    last = {r["run"]: r["cum_regret"] for r in rows}
    for r in load_records(rec):
        assert abs(last[r.run] - r.regret) <= 1e-9


def test_solve_expopt(capsys):
    code, doc = run(capsys, "solve-expopt", "--d", "2", "--eta", "0.1", "--precision", "1e-4")
    assert code == EXIT_OK
    assert doc["value"] <= doc["reference"] + 1e-4
    assert doc["value"] - doc["lower_bound"] <= 1e-4


def test_audit_passes(capsys):
    code, doc = run(capsys, "audit", "--runs", "200")
    assert code == EXIT_OK and doc["passed"]


def test_audit_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "a.yaml"
    cfg.write_text(yaml.safe_dump({"audit": {"inject_bias": 0.01, "only": ["unbiasedness"]}}))
    code, doc = run(capsys, "audit", "--config", str(cfg), "--runs", "20")
    assert code == EXIT_AUDIT and not doc["passed"]
    assert doc["audits"][0]["witness"] is not None


def test_ids_command(tmp_path, capsys):
    cfg = tmp_path / "i.yaml"
    cfg.write_text(yaml.safe_dump({
        "game": {"kind": "armed_bandit", "d": 2},
        "prior": {"support": [{"sequence": [1, 1, 2, 2], "weight": 0.5},
                              {"sequence": [2, 2, 1, 1], "weight": 0.5}]},
        "run": {"runs": 50},
    }))
    code, doc = run(capsys, "ids", "--config", str(cfg), "--seed", "3")
    assert code == EXIT_OK and doc["episodes"] == 50 and doc["holds"]


@pytest.mark.parametrize("argv", [
    ["simulate", "--config", "/no/such/file.yaml"],
    ["export", "--out", "x.csv"],
    ["ids"],
    ["frobnicate"],
    ["simulate", "--format", "xml"],
])
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_bad_config_contents(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("game: [1, 2\n")
    assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text(yaml.safe_dump({"adversary": {"kind": "martian"}}))
    assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG
    cfg.write_text(yaml.safe_dump({"game": "bandit"}))
    assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG
