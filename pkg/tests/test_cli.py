import json
import subprocess
import sys

import numpy as np
import pytest

from nlkg.cli import main
from nlkg.io import load_json, read_csv, write_field
from nlkg.manifold import GraphSample
from nlkg.io import save_graph
from nlkg.rng import SplitMix64, random_state
from nlkg.spectral import project_arr


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solitons(capsys, tmp_path):
    code, out, _ = run(capsys, "solitons", "--out", tmp_path)
    assert code == 0
    d = json.loads(out)
    assert d["residual"] < 1e-10 and d["HQ"][0][0] == pytest.approx(4 / 3, abs=1e-6)
    assert d["energy"] == pytest.approx(4 / 3, abs=1e-6)
    assert (tmp_path / "solitons.json").exists() and (tmp_path / "Q.csv").exists()
    assert "smallness_warnings" in d


def test_spectrum_report(capsys):
    code, out, _ = run(capsys, "spectrum", "--samples", 5)
    d = json.loads(out)
    assert code == 0 and d["k_list"][0] == pytest.approx(np.sqrt(3), abs=1e-7)
    assert d["omega_pairings"][0][0] == pytest.approx(1.0, abs=1e-8)
    lo, hi = d["equivalence_ratio_range"]
    assert 0 < lo <= hi


def test_config_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.N = 1023\n")
    assert run(capsys, "solitons", "--config", bad)[0] == 2
    assert run(capsys, "solitons", "--config", tmp_path / "missing.cfg")[0] == 2
    bad.write_text("nope.key = 3\n")
    code, _, err = run(capsys, "spectrum", "--config", bad)
    assert code == 2 and "unknown config key" in err


def test_numerical_failure_exit_3(capsys, tmp_path):
    cfg = tmp_path / "coarse.cfg"
    cfg.write_text("grid.N = 32\n")
    assert run(capsys, "spectrum", "--config", cfg)[0] == 3


def test_empty_suite_exit_0(capsys, tmp_path):
    code, out, _ = run(capsys, "suite", "--out", tmp_path)
    assert code == 0 and "0/0 passed" in out
    assert load_json(tmp_path / "record.json")["results"] == []


def test_suite_named_entry(capsys, tmp_path):
    code, out, _ = run(capsys, "suite", "spectrum", "--out", tmp_path)
    assert code == 0 and "PASS [ 2] spectrum" in out


def test_evolve_trajectory(capsys, tmp_path, grid):
    write_field(tmp_path / "v0.fld", random_state(SplitMix64(3), grid, norm=0.005))
    code, _, _ = run(capsys, "evolve", "--initial", tmp_path / "v0.fld", "--t", 0.4, "--dt", 0.01,
                     "--out", tmp_path / "o")
    assert code == 0
    head, rows = read_csv(tmp_path / "o" / "trajectory.csv")
    assert head == ["t", "h_norm", "lambda_plus", "lambda_minus", "mu", "nu", "gamma_E", "E", "P", "c"]
    assert len(rows) == 5 and float(rows[-1][0]) == pytest.approx(0.4)
    code, out, _ = run(capsys, "evolve", "--full", "--t", 0.2, "--dt", 0.01)
    assert code == 0 and out.splitlines()[0].startswith("t,h_norm")


def test_mobile_dist(capsys, tmp_path, grid):
    a = random_state(SplitMix64(1), grid, norm=0.03)
    write_field(tmp_path / "a.fld", a)
    write_field(tmp_path / "b.csv", a)
    code, out, _ = run(capsys, "mobile-dist", tmp_path / "a.fld", tmp_path / "b.csv")
    d = json.loads(out)
    assert code == 0 and d == {"value": 0.0, "q": [0.0], "j": 0}


def test_manifold_subcommands(capsys, tmp_path, grid, frame):
    psi = project_arr(frame, random_state(SplitMix64(4), grid).stack(), ">=0")
    psi *= 0.004 / frame.enorm_arr(psi)
    write_field(tmp_path / "psi.fld", psi)
    code, out, _ = run(capsys, "manifold", "eval", "--psi-file", tmp_path / "psi.fld")
    d = json.loads(out)
    assert code == 0 and abs(d["value"][0]) <= d["ell_bound"]

    code, out, _ = run(capsys, "manifold", "unstable", "--lambda", 0.002)
    d = json.loads(out)
    assert code == 0 and d["lambda_plus"][0] == 0.002 and d["decay_ratio"] < 1e-2

    save_graph(GraphSample(np.array([psi, 0.5 * psi]), np.zeros((2, 1)), 0.1, 0.02), tmp_path / "g.json")
    code, out, _ = run(capsys, "manifold", "transform", "--graph-file", tmp_path / "g.json", "--T", 0.5,
                       "--out", tmp_path / "t")
    assert code == 0 and (tmp_path / "t" / "graph.json").exists()
    assert abs(json.loads(out)["change"]) < 1e-3

    code, out, _ = run(capsys, "manifold", "trap", "--eta", 1e-3, "--sign", 1, "--tmax", 10)
    d = json.loads(out)
    assert code == 0 and not d["trapped"] and 1.0 < d["t_exit"] < 4.0


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "nlkg.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "suite" in r.stdout
