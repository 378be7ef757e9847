import json
import math
import os
import subprocess
import sys

import pytest

from chenfliess import builtin_system, make_dataset
from chenfliess.cli import main


@pytest.fixture
def capsys_json(capsys):
    def run(argv):
        main(argv)
        out = capsys.readouterr().out
        return json.loads(out)

    return run


@pytest.fixture
def path_file(tmp_path):
    p = tmp_path / "path.json"
    p.write_text(json.dumps({
        "m": 2,
        "breakpoints": [0.0, 0.15, 0.3],
        "values": [[1.0, 0.0], [0.0, 1.0]],
        "M": 1.0,
    }))
    return str(p)


@pytest.fixture
def system_file(tmp_path):
    p = tmp_path / "system.json"
    p.write_text(json.dumps({
        "n": 1, "m": 1, "g": [["x1"]], "c": [1.0],
        "r": 2.0, "M": 1.0, "T": 0.5,
    }))
    return str(p)


def test_parse_check(capsys_json):
    out = capsys_json(["parse-check", "--expr", "2*x1 + x2^2", "--n", "2"])
    assert out["ok"]
    assert "x1" in out["simplified"]


def test_parse_check_error_propagates():
    with pytest.raises(Exception):
        main(["parse-check", "--expr", "x9", "--n", "2"])


def test_signature_subcommand(capsys_json, path_file):
    out = capsys_json(["signature", "--path", path_file, "--order", "2"])
    entries = {tuple(e["word"]): e["value"] for e in out["entries"]}
    assert entries[()] == 1.0
    assert entries[(1,)] == pytest.approx(0.15)
    assert entries[(1, 2)] == pytest.approx(0.15 * 0.15)
    assert entries[(2, 1)] == 0.0


def test_lie_subcommand(capsys_json):
    out = capsys_json([
        "lie", "--system", "bilinear2d", "--word", "1,2",
        "--point", "1.0,0.0", "--lambda-k", "2", "--grid", "16",
    ])
    assert out["expr"] == "x1"
    assert out["value"] == 1.0
    assert out["lambda_k"]["k"] == 2
    assert out["lambda_k"]["value"] <= 1.0 + 1e-12


def test_eval_series_subcommand(capsys_json, system_file, tmp_path):
    p = tmp_path / "u.json"
    p.write_text(json.dumps({
        "m": 1, "breakpoints": [0.0, 0.5], "values": [[1.0]], "M": 1.0,
    }))
    contrib = tmp_path / "contrib.csv"
    out = capsys_json([
        "eval-series", "--system", system_file, "--path", str(p),
        "--x0", "1.0", "--order", "12", "--ode-step", "1e-3",
        "--family", json.dumps({"kind": "bilinear", "r": 2.0, "a": 1.0}),
        "--contributions-out", str(contrib),
    ])
    assert out["value"] == pytest.approx(math.exp(0.5), abs=1e-8)
    assert out["discrepancy"] <= out["tail_bound"] + 1e-8
    lines = contrib.read_text().splitlines()
    assert lines[0] == "order,contribution"
    assert len(lines) == 14  # header + orders 0..12
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0)


def test_simulate_subcommand(capsys_json, system_file, tmp_path):
    p = tmp_path / "u.json"
    p.write_text(json.dumps({
        "m": 1, "breakpoints": [0.0, 0.5], "values": [[1.0]], "M": 1.0,
    }))
    traj = tmp_path / "traj.csv"
    out = capsys_json([
        "simulate", "--system", system_file, "--path", str(p),
        "--x0", "1.0", "--step", "1e-3", "--trajectory-out", str(traj),
    ])
    assert out["y"] == pytest.approx(math.exp(0.5), abs=1e-9)
    header = traj.read_text().splitlines()[0]
    assert header == "t,x1"


def test_bound_subcommands(capsys_json, capsys, tmp_path):
    out = capsys_json([
        "bound", "bilinear", "--r", "1", "--m", "1", "--M", "1",
        "--T", "1", "--a", "1", "--N", "100",
    ])
    assert out["total"] == pytest.approx(math.e / 10.0)

    out = capsys_json([
        "bound", "analytic", "--r", "1", "--n", "1", "--m", "1", "--M", "1",
        "--T", "0.1", "--a_r", "1", "--N", "100",
    ])
    assert out["total"] == pytest.approx(0.375)

    out = capsys_json([
        "bound", "hopfield", "--r", "1", "--n", "1", "--M", "1",
        "--T", "0.5", "--a", "1", "--b", "1", "--N", "100",
    ])
    assert out["total"] == "divergent"
    assert not out["precondition_ok"]

    out_file = tmp_path / "bound.json"
    main([
        "bound", "theorem1",
        "--family", json.dumps({"kind": "bilinear", "r": 1.0, "a": 1.0}),
        "--m", "1", "--M", "1", "--T", "1", "--N", "100", "--order", "60",
        "--out", str(out_file),
    ])
    table = capsys.readouterr().out
    assert "partial_sum" in table  # human table on stdout when --out is set
    report = json.loads(out_file.read_text())
    assert report["total"] == pytest.approx(math.e / 10.0, rel=1e-10)


def test_rademacher_and_erm_subcommands(capsys_json, tmp_path):
    built = builtin_system("bilinear2d")
    data, _ = make_dataset(built.spec, built.family, 30, 3, seed=5)
    csv_path = tmp_path / "train.csv"
    data.to_csv(csv_path)
    out = capsys_json([
        "rademacher", "--system", "bilinear2d", "--data", str(csv_path),
        "--m1", str(data.m1), "--order", "3", "--n-controls", "16",
        "--n-eps", "32", "--seed", "7",
    ])
    assert 0.0 <= out["estimate"] <= 1.0
    out = capsys_json([
        "erm", "--system", "bilinear2d", "--data", str(csv_path),
        "--m1", str(data.m1), "--order", "3", "--seed", "7",
    ])
    assert out["train_risk"] <= 1e-8
    for row in out["coefficients"]:
        assert abs(row["theta"]) <= row["box"] * (1 + 1e-12)


def test_seed_required_for_stochastic_subcommands(tmp_path):
    with pytest.raises(SystemExit):
        main(["rademacher", "--system", "bilinear2d", "--data", "x.csv",
              "--m1", "1", "--order", "2"])


def _run_experiment_subprocess(config_path, out_path, threads):
    env = dict(os.environ)
    env["OMP_NUM_THREADS"] = str(threads)
    env["OPENBLAS_NUM_THREADS"] = str(threads)
    env["MKL_NUM_THREADS"] = str(threads)
    subprocess.run(
        [sys.executable, "-m", "chenfliess.cli", "experiment",
         "--config", str(config_path), "--out", str(out_path)],
        check=True, env=env, capture_output=True,
    )
    return out_path.read_bytes()


def test_experiment_byte_identical_across_thread_counts(tmp_path):
    config = {
        "system": "bilinear2d", "order": 3, "n_train": 60, "n_test": 60,
        "delta": 0.05, "seed": 33, "n_controls": 16, "n_eps": 32,
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    a = _run_experiment_subprocess(cfg, tmp_path / "a.json", threads=1)
    b = _run_experiment_subprocess(cfg, tmp_path / "b.json", threads=4)
    assert a == b
    report = json.loads(a)
    assert report["checks"]["empirical_le_certified"]
