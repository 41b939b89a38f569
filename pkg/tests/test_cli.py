import csv
import json

import pytest

from svprka import harness
from svprka.cli import main
from svprka.errors import NumericalError


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n1": 6, "n2": 6, "rank": 1, "lambda_grid": [4, 8], "trials": 2,
                                "solver": {"iters_per_row": 20}}))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sweep_writes_csv(small_config, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(small_config), "--out", str(out), "--seed", "9"]) == 0
    rows = read_rows(out)
    assert rows[0][0] == "lambda"
    assert len(rows) == 1 + 2 * 2 * 2 + 2 * 2 * 2


def test_trials_flag_overrides_config(small_config, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(small_config), "--out", str(out), "--trials", "1"]) == 0
    assert len(read_rows(out)) == 1 + 4 + 8


def test_trial_subcommand(small_config, tmp_path):
    out = tmp_path / "trial.csv"
    assert main(["trial", "--config", str(small_config), "--lambda", "8", "--trial-index", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r[2] for r in rows[1:3]] == ["1", "1"]
    assert rows[1][0] == "8.0"


def test_probe_subcommand(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n1": 4, "n2": 4, "rank": 1, "trials": 2}))
    out = tmp_path / "probe.csv"
    assert main(["probe", "--config", str(cfg), "--n-grid", "30,60", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0][0] == "n" and [r[0] for r in rows[1:]] == ["30", "60"]


def test_bound_subcommand(small_config, tmp_path):
    out = tmp_path / "bound.csv"
    assert main(["bound", "--config", str(small_config), "--lambda", "8", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0][:2] == ["iteration", "distance"]
    assert all(r[-1] == "1" for r in rows[1:])


def test_unknown_key_exits_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambdas": [8]}))
    assert main(["sweep", "--config", str(cfg)]) == 1
    assert "lambdas" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.json")]) == 1


def test_bad_output_path_exits_1(small_config, tmp_path):
    assert main(["trial", "--config", str(small_config), "--lambda", "4", "--out", str(tmp_path / "no" / "x.csv")]) == 1


def test_numerical_failure_exits_2(small_config, monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise NumericalError("solvers", "svp_rka", "SVD failed")

    monkeypatch.setattr(harness, "svp_rka", fail)
    assert main(["trial", "--config", str(small_config), "--lambda", "4"]) == 2
    assert "solvers.svp_rka" in capsys.readouterr().err
