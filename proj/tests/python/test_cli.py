import json
import os
import pathlib
import subprocess

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
CLI = os.environ.get("RELULAB_CLI", str(ROOT / "build" / "relulab"))


def run(*args, cwd=ROOT):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True)


def test_no_arguments_is_a_usage_error():
    r = run()
    assert r.returncode == 2
    assert "Usage" in r.stderr or "usage" in r.stderr.lower()


def test_unknown_flag_is_a_usage_error():
    assert run("bounds", "--no-such-flag").returncode == 2


def test_bounds_prints_gen_gap(tmp_path):
    inputs = tmp_path / "inputs.json"
    inputs.write_text(json.dumps({"G_lip": 1, "R_data": 1, "B_step": 1, "d_eff": 4, "delta_conf": 0.05, "n_samples": 1000}))
    r = run("bounds", "--in", inputs)
    assert r.returncode == 0
    line = next(l for l in r.stdout.splitlines() if l.startswith("gen_gap"))
    assert line.split()[1] == "2.1045"


def test_bounds_rejects_unknown_field(tmp_path):
    inputs = tmp_path / "inputs.json"
    inputs.write_text(json.dumps({"nope": 1}))
    assert run("bounds", "--in", inputs).returncode == 1


def test_arrangement_three_lines():
    r = run("arrangement", "--file", "data/three_lines.txt")
    assert r.returncode == 0
    assert "exact 7, bound 7, tight" in r.stdout


def test_train_audit_report(tmp_path):
    r = run("train", "--config", "configs/reference.cfg", "--report-dir", tmp_path, "--run-name", "cli", "--steps", 200)
    assert r.returncode == 0, r.stderr
    run_dir = tmp_path / "cli"
    audit = run("audit", "--run", run_dir, "--json")
    assert audit.returncode == 0
    assert json.loads(audit.stdout) == json.loads((run_dir / "report.json").read_text())
    out = tmp_path / "merged"
    rep = run("report", "--runs", run_dir, "--out", out)
    assert rep.returncode == 0, rep.stderr
    for name in ("margins.csv", "crossings.csv", "cosine.csv", "vmin.csv"):
        text = (out / name).read_bytes()
        assert b"\r" not in text and text.startswith(b"run,t,")
    kak = run("kakeya", "--run", run_dir, "--json")
    assert kak.returncode == 0, kak.stderr
    bar = run("barrier", "--from", run_dir / "init.json", "--to", run_dir / "final.json",
              "--config", "configs/reference.cfg", "--json")
    assert bar.returncode == 0, bar.stderr


def test_missing_file_is_a_usage_error():
    assert run("arrangement", "--file", "does/not/exist.txt").returncode == 2


def test_malformed_file_is_a_runtime_error(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("2 3\n1 0 0\n")
    r = run("arrangement", "--file", bad)
    assert r.returncode == 1
    assert r.stderr.startswith("error:")
