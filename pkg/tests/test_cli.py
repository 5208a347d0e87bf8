import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cdmaharq.cli import main, parse_range, parse_values

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

SMALL = {
    "seed": 5, "packets_per_node": 3, "mode": "collaborative", "gamma_min_db": 16,
    "codes": [[7, 3], [15, 9]], "sl_menu": [10, 40],
    "sinks": [{"id": "S", "position": [0, 0, 0]}],
    "nodes": [{"id": "A", "position": [1000, 0, 0]}, {"id": "B", "position": [0, 800, 0]}],
    "neighborhoods": [{"id": 0, "sink": "S", "family_seed": 0.3, "members": ["A", "B"]}],
    "links": [{"tx": "A", "rx": "S", "extra_loss_db": 30}],
}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(SMALL))
    return p


def test_parse_range():
    assert parse_range("-5:15:2") == [-5, -3, -1, 1, 3, 5, 7, 9, 11, 13, 15]
    assert parse_range("1,2.5") == [1.0, 2.5]
    with pytest.raises(ValueError):
        parse_range("0:1:0")


def test_parse_values():
    assert parse_values("1e-9, 0.5,true,flip") == [1e-9, 0.5, True, "flip"]


def test_run_twice_identical(small, tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--config", str(small), "--seed", "7", "--out", str(tmp_path / d)]) == 0
    for name in ("run_report.json", "run_nodes.csv", "run_sinr.csv", "run_events.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "a" / "run_report.json").read_text())["seed"] == 7


def test_output_dir_from_environment(small, tmp_path, monkeypatch):
    monkeypatch.setenv("CDMAHARQ_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--config", str(small)]) == 0
    assert (tmp_path / "env" / "run_events.jsonl").exists()


def test_config_error_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("seed: 1\nq: 7\n" + "\n".join(f"{k}: {json.dumps(v)}" for k, v in SMALL.items() if k != "seed"))
    assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "bad.yaml:2: q" in capsys.readouterr().err


def test_runtime_error_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["codegen", "--out", str(blocker)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_sweep_and_compare(small, tmp_path):
    assert main(["sweep", "--config", str(small), "--axis", "q", "--values", "0,1", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert [r["value"] for r in rows] == ["0", "1"]
    assert main(["compare", "--config", str(small), "--out", str(tmp_path), "--format", "json"]) == 0
    assert len(json.loads((tmp_path / "compare.json").read_text())) == 4


def test_optimize_with_oracle(tmp_path):
    rc = main(["optimize", "--config", str(SCENARIOS / "opt.json"), "--oracle", "--resolution", "401",
               "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "optimize.json").read_text())
    assert doc["feasibility_agrees"]
    assert doc["objective_difference"] < 1e-3
    assert doc["solution"]["kkt_residual"] < 1e-6


def test_codegen(tmp_path):
    assert main(["codegen", "--sl", "4", "--bits", "2", "--seed", "0.3", "--burn-in", "0",
                 "--bifurcation", "4.0", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "code.chips").read_text().splitlines()
    assert lines[1] == "+1 +1 +1 -1"


def test_ber_monotone_columns(tmp_path):
    rc = main(["ber", "--mod", "bpsk", "--code", "15,9", "--sl", "10,20,30,40", "--snr", "-17:-8:3",
               "--bits", "4000", "--out", str(tmp_path)])
    assert rc == 0
    rows = list(csv.DictReader(open(tmp_path / "ber.csv")))
    assert len(rows) == 4
    for r in rows:
        bers = [float(r[f"ber_sl{s}"]) for s in (10, 20, 30, 40)]
        assert all(a >= b for a, b in zip(bers, bers[1:]))
