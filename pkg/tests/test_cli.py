import json
from pathlib import Path

import numpy as np
import pytest

from oqrw.cli import main

DATA = Path(__file__).parent / "data"
MODELS = Path(__file__).parents[1] / "src" / "oqrw" / "models"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_bundled(capsys):
    code, out, _ = run(capsys, "validate", "bc_walk")
    assert code == 0
    assert "VALID" in out


def test_validate_typo(capsys):
    code, out, _ = run(capsys, "validate", str(DATA / "oqrw_2d_printed.json"))
    assert code == 1
    assert "0.1875 at entry (1,1)" in out


def test_validate_malformed(capsys):
    code, _, err = run(capsys, "validate", str(DATA / "malformed.json"))
    assert code == 2
    assert "malformed.json:4:" in err


def test_validate_blocks(capsys):
    code, out, _ = run(capsys, "validate", "blocks_direct_sum")
    assert code == 0
    assert "blocks: 2" in out


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "validate")[0] == 2
    assert run(capsys, "simulate", "bc_walk", "--traj", "1")[0] == 2


def test_analyze_bc_walk(capsys):
    code, out, _ = run(capsys, "analyze", "bc_walk")
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["m"][0]) < 1e-12
    assert abs(rep["C"][0][0] - 8 / 9) < 1e-12


def test_analyze_bc_record(capsys):
    rep = json.loads(run(capsys, "analyze", "bc_record")[1])
    assert rep["mode"] == "record"
    assert np.abs(np.array(rep["C"]) - 2 / 9 * np.array([[1, -1], [-1, 1]])).max() < 1e-12


def test_analyze_is_deterministic(capsys):
    assert run(capsys, "analyze", "oqrw_2d_corrected")[1] == run(capsys, "analyze", "oqrw_2d_corrected")[1]


def test_analyze_direct_sum_without_blocks(capsys, tmp_path):
    doc = json.loads((MODELS / "blocks_direct_sum.json").read_text())
    doc.pop("blocks")
    path = tmp_path / "nb.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "analyze", str(path))
    assert code == 1
    assert "fixed_space_dim = 2" in err


def test_exact_table(capsys, tmp_path):
    code, out, _ = run(capsys, "exact", "bc_walk", "--steps", "4", "--out", str(tmp_path))
    assert code == 0
    probs = {tuple(p["site"]): p["p"] for p in json.loads(out)["probabilities"]}
    expected = {(-4,): 1 / 81, (-2,): 10 / 81, (0,): 27 / 81, (2,): 26 / 81, (4,): 17 / 81}
    assert max(abs(probs[k] - v) for k, v in expected.items()) < 1e-12
    assert (tmp_path / "exact.csv").exists() and (tmp_path / "exact.gp").exists()


def test_exact_zero_steps(capsys):
    rep = json.loads(run(capsys, "exact", "bc_walk", "--steps", "0")[1])
    assert rep["probabilities"] == [{"site": [0], "p": 1.0}]


def test_exact_trivial(capsys):
    rep = json.loads(run(capsys, "exact", "trivial_walk", "--steps", "10")[1])
    big = [p for p in rep["probabilities"] if p["p"] > 1e-14]
    assert big == [{"site": [10], "p": pytest.approx(1.0, abs=1e-14)}]


def test_exact_budget_warning(capsys):
    with pytest.warns(UserWarning, match="budget"):
        run(capsys, "exact", "bc_walk", "--steps", "3", "--budget", "0")


def test_exact_rejects_record(capsys):
    assert run(capsys, "exact", "bc_record")[0] == 2


def test_simulate_worker_invariance(capsys):
    args = ["simulate", "bc_walk", "--steps", "60", "--traj", "2100", "--seed", "3"]
    one = run(capsys, *args, "--workers", "1")[1]
    two = run(capsys, *args, "--workers", "2")[1]
    assert one == two
    rep = json.loads(one)
    assert "zscores" in rep and "workers" not in rep


def test_simulate_trivial(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "trivial_walk", "--steps", "20", "--traj", "10", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    assert rep["empirical"]["covariance"] == [[0.0]]
    assert rep["empirical"]["drift_mean"] == [1.0]
    for name in ("simulate.json", "trajectories.csv", "histogram.csv", "histogram.gp"):
        assert (tmp_path / name).exists()


def test_simulate_without_unique_state(capsys, tmp_path):
    code, out, err = run(capsys, "simulate", "blocks_direct_sum", "--steps", "5", "--traj", "4")
    assert code == 0
    assert "analytic" not in json.loads(out)
    assert "no analytic comparison" in err


def test_blocks_command(capsys, tmp_path):
    code, out, _ = run(capsys, "blocks", "blocks_direct_sum", "--steps", "200", "--traj", "2000", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    assert rep["weights"] == [0.5, 0.5]
    assert abs(rep["blocks"][0]["C"][0][0] - 8 / 9) < 1e-12
    assert abs(rep["blocks"][1]["m"][0] - 1) < 1e-12
    assert all(abs(z) <= 3 for z in rep["classification"]["zscores"])
    assert (tmp_path / "classification.csv").exists()


def test_blocks_single_block(capsys):
    rep = json.loads(run(capsys, "blocks", "bc_walk", "--steps", "20", "--traj", "20")[1])
    assert rep["weights"] == [1.0]


def test_blocks_wrong_projectors(capsys, tmp_path):
    doc = json.loads((MODELS / "bc_walk.json").read_text())
    doc["blocks"] = [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]], [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "blocks", str(path), "--steps", "5", "--traj", "4")
    assert code == 1
    assert "residual" in err
