import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from distjets.cli import build_parser, dumps, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_derive_text(capsys):
    code, out, err = run_cli(capsys, "derive", "--k", "3", "--s", "2")
    assert code == 0 and out.strip() == "1 * B[i1,i2; j1]"
    assert err.startswith("# config ")


def test_derive_p44(capsys):
    _, out, _ = run_cli(capsys, "derive", "--k", "4", "--s", "4")
    lines = out.strip().splitlines()
    assert len(lines) == 3 and all(line.startswith("-1 * B[") and line.count("B[") == 2
                                   for line in lines)


def test_derive_zero_and_json(capsys):
    _, out, _ = run_cli(capsys, "derive", "--k", "5", "--s", "1")
    assert out.strip() == "0"
    _, out, _ = run_cli(capsys, "derive", "--k", "4", "--s", "2", "--format", "json")
    doc = json.loads(out)
    assert doc["k"] == 4 and len(doc["terms"]) == 2


@pytest.mark.parametrize("argv", [
    ["derive", "--k", "9", "--s", "2"],
    ["derive", "--k", "3", "--s", "4"],
    ["derive", "--k", "3", "--s", "2", "--bogus"],
    ["flow", "--shape", "torus3:R=2,r=0.5"],
    ["flow", "--shape", "circle:R=1", "--stepper", "explicit"],
    ["flow", "--shape", "circle:R=1", "--eps", "-1"],
    ["mcf-compare", "--shape", "circle:R=1", "--eps-list", "1e-3,1e-2"],
    ["verify-identities", "--shape", "blob"],
    [],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_norm_scan_is_deterministic(capsys, tmp_path):
    argv = ["norm-scan", "--k", "3", "--n", "1", "--m", "1", "--samples", "1000", "--seed", "42"]
    code, first, _ = run_cli(capsys, *argv, "--out", str(tmp_path))
    _, second, _ = run_cli(capsys, *argv)
    assert code == 0 and first == second
    rep = json.loads(first)
    assert abs(rep["min_ratio"] - 3.0) < 1e-9 and "e+00" in first
    echo = json.loads((tmp_path / "config.json").read_text())
    assert echo["seed"] == 42 and echo["command"] == "norm-scan"


def test_verify_identities_circle(capsys):
    code, out, _ = run_cli(capsys, "verify-identities", "--shape", "circle:R=1", "--k-max", "4",
                           "--samples", "2")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert rep["recursion_vs_oracle"]["4"]["norm_Ak"] == pytest.approx([33.0, 33.0], abs=1e-4)


def test_verify_identities_plane(capsys):
    code, out, _ = run_cli(capsys, "verify-identities", "--shape", "plane", "--k-max", "5",
                           "--samples", "2")
    rep = json.loads(out)
    assert code == 0
    assert all(max(v["norm_Ak"]) == 0 for v in rep["recursion_vs_oracle"].values())


def test_verify_identities_failure_exit(capsys):
    code, out, _ = run_cli(capsys, "verify-identities", "--shape", "ellipse:a=2,b=1",
                           "--k-max", "3", "--samples", "2", "--tol", "1e-14")
    assert code == 1 and not json.loads(out)["passed"]


def test_flow_fixed_point(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "flow", "--k", "3", "--eps", "1", "--shape", "circle:R=3",
                           "--nodes", "128", "--stepper", "descent", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["status"] == "converged"
    assert abs(summary["radius_fit"] - math.sqrt(3)) < 1e-3
    with (tmp_path / "energy_log.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "energy", "length", "max_abs_curvature", "radius_fit"]
    assert abs(float(rows[-1][4]) - math.sqrt(3)) < 1e-3
    assert (tmp_path / "snapshots.csv").exists()
    assert json.loads((tmp_path / "config.json").read_text())["flow_config"]["k"] == 3


def test_flow_explicit_tracks_circle_law(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "flow", "--k", "3", "--eps", "1e-3", "--shape", "circle:R=1",
                         "--nodes", "32", "--stepper", "explicit", "--t-end", "0.4",
                         "--out", str(tmp_path))
    assert code == 0
    d = np.loadtxt(tmp_path / "energy_log.csv", delimiter=",", skiprows=1)
    assert d[-1, 0] == pytest.approx(0.4)
    assert np.abs(d[:, 4] - np.sqrt(1 - 2 * d[:, 0])).max() < 20e-3 + 1e-3


def test_flow_singularity_exit(capsys, tmp_path, monkeypatch):
    import distjets.flow as flow

    calls = {"n": 0}

    def fake(nodes):
        calls["n"] += 1
        return calls["n"] > 5

    monkeypatch.setattr(flow, "self_intersects", fake)
    code, out, _ = run_cli(capsys, "flow", "--shape", "circle:R=1", "--nodes", "32",
                           "--stepper", "explicit", "--t-end", "0.1", "--out", str(tmp_path))
    assert code == 3 and json.loads(out)["status"] == "self_intersection"
    assert (tmp_path / "snapshots.csv").exists()


def test_mcf_compare_circle(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "mcf-compare", "--eps-list", "1e-1,1e-2,1e-3",
                           "--shape", "circle:R=1", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["monotone"]
    rows = list(csv.reader((tmp_path / "mcf_compare.csv").open()))
    devs = [float(r[1]) for r in rows[1:]]
    assert rows[0][:2] == ["eps", "deviation"] and devs == sorted(devs, reverse=True)


def test_dumps_formats_floats():
    text = dumps({"a": 1.5, "b": [1, 2.0], "c": float("inf"), "d": None, "e": "x"})
    doc = json.loads(text)
    assert doc == {"a": 1.5, "b": [1, 2.0], "c": "inf", "d": None, "e": "x"}
    assert "1.50000000000000000e+00" in text


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("derive", "verify-identities", "norm-scan", "flow", "mcf-compare"):
        assert name in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "distjets", "derive", "--k", "3", "--s", "3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.strip() == "0"
