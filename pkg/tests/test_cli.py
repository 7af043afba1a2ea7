import json
from pathlib import Path

import numpy as np
import pytest

from polynet.cli import main
from polynet.meshing import read_mesh


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


PERIODIC_MESH = {"mesh": {"kind": "periodic", "dim": 3, "m": 2}}

STOCHASTIC_MESH = {
    "mesh": {
        "kind": "stochastic",
        "dim": 3,
        "h": 0.5,
        "lattice": {
            "kind": "jittered-grid",
            "intensity": 27.0,
            "r_min": 0.2,
            "R_cov": 0.36,
            "seed": 7,
        },
    }
}


def test_mesh_periodic(tmp_path, capsys):
    cfg = write_config(tmp_path, PERIODIC_MESH)
    out = tmp_path / "out"
    assert main(["mesh", "--config", cfg, "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "N_el = 48" in captured
    mesh = read_mesh(out / "mesh.txt")
    assert mesh.num_elements == 48


def test_mesh_deterministic_bytes(tmp_path):
    cfg = write_config(tmp_path, STOCHASTIC_MESH)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["mesh", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["mesh", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "mesh.txt").read_bytes() == (out2 / "mesh.txt").read_bytes()
    assert (out1 / "admissibility.json").read_bytes() == (
        out2 / "admissibility.json"
    ).read_bytes()
    report = json.loads((out1 / "admissibility.json").read_text())
    assert report["separation_ok"] is True


def test_lattice_check(tmp_path):
    cfg = write_config(tmp_path, STOCHASTIC_MESH)
    out = tmp_path / "out"
    assert main(["lattice-check", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "admissibility.json").read_text())
    assert {"covering_ok", "separation_ok", "measured_R", "measured_r"} <= set(report)


def test_lattice_check_needs_stochastic(tmp_path):
    cfg = write_config(tmp_path, PERIODIC_MESH)
    assert main(["lattice-check", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_infeasible_lattice_exit_3(tmp_path):
    bad = {
        "mesh": {
            "kind": "stochastic",
            "dim": 3,
            "h": 0.5,
            "lattice": {
                "kind": "jittered-grid",
                "intensity": 27.0,
                "r_min": 0.9,
                "R_cov": 0.9,
                "seed": 1,
            },
        }
    }
    cfg = write_config(tmp_path, bad)
    assert main(["mesh", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_unknown_key_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"mesh": {"kind": "periodic", "m": 2, "dim": 3,
                                           "bogus": 1}})
    assert main(["mesh", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    cfg2 = write_config(tmp_path, {"wrong_top": {}}, "c2.json")
    assert main(["mesh", "--config", cfg2, "--out", str(tmp_path / "o")]) == 2


def test_malformed_json_exit_2(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["mesh", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_missing_section_exit_2(tmp_path):
    cfg = write_config(tmp_path, {"model": {"pair": {"kind": "quadratic-spring"}}})
    assert main(["minimize", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


MINIMIZE_CALIBRATED = {
    "model": {
        "pair": {"kind": "langevin-chain", "k": 1.0, "beta": 1.0,
                 "c": 2.8040874567410107, "n": 1.0},
        "f": 1.0,
    },
    "mesh": {"kind": "periodic", "dim": 2, "m": 4, "diagonal": "nw"},
    "bc": {"kind": "affine-layer",
           "xi": [[1.0, 0.0], [0.0, 1.0]], "depth": "2h"},
}


def test_minimize_calibrated_rest_energy(tmp_path):
    cfg = write_config(tmp_path, MINIMIZE_CALIBRATED)
    out = tmp_path / "out"
    assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
    result = json.loads((out / "result.json").read_text())
    assert abs(result["energy"]) <= 1e-10
    assert result["converged"] is True


def test_minimize_honest_nonconvergence_exit_0(tmp_path):
    payload = {
        "model": {"pair": {"kind": "langevin-chain"}, "f": 1.0},
        "mesh": {"kind": "periodic", "dim": 3, "m": 2},
        "bc": {"kind": "dirichlet-face-free-traction",
               "xi": [[1.5, 0, 0], [0, 1, 0], [0, 0, 1]],
               "faces": ["x-", "x+"]},
        "solver": {"max_iters": 1},
    }
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "out"
    assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
    result = json.loads((out / "result.json").read_text())
    assert result["converged"] is False


def test_minimize_repeat_identical(tmp_path):
    payload = dict(MINIMIZE_CALIBRATED)
    payload["minimize"] = {"write_positions": True}
    cfg = write_config(tmp_path, payload)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["minimize", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["minimize", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "result.json").read_bytes() == (out2 / "result.json").read_bytes()
    assert (out1 / "deformed_positions.txt").read_bytes() == (
        out2 / "deformed_positions.txt"
    ).read_bytes()


HOMOGENIZE_PERIODIC = {
    "seed": 0,
    "model": {"pair": {"kind": "quadratic-spring", "stiffness": 1.0}, "f": 1.0},
    "mesh": {"kind": "periodic", "dim": 2, "m": 4, "diagonal": "nw"},
    "homogenize": {
        "xi_list": [[[1.0, 0.0], [0.0, 1.0]]],
        "m_list": [2, 4],
    },
}


def test_homogenize_periodic_rows_and_gaps(tmp_path):
    cfg = write_config(tmp_path, HOMOGENIZE_PERIODIC)
    out = tmp_path / "out"
    assert main(["homogenize", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "homogenize.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 2  # header + one row per scale
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["estimates"][0]["cauchy_gaps"]) == 1


def test_homogenize_stochastic_rows(tmp_path):
    payload = {
        "seed": 11,
        "model": {"pair": {"kind": "quadratic-spring", "stiffness": 1.0}, "f": 1.0},
        "mesh": {
            "kind": "stochastic",
            "dim": 2,
            "h": 0.25,
            "lattice": {"kind": "matern-hardcore", "intensity": 1.0,
                        "r_min": 0.3, "R_cov": 1.0, "seed": 0},
        },
        "homogenize": {
            "xi_list": [[[1.2, 0.0], [0.0, 1.0]]],
            "h_list": [0.3, 0.25],
            "n_realizations": 4,
        },
    }
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "out"
    assert main(["homogenize", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "homogenize.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 2 * 4
    summary = json.loads((out / "summary.json").read_text())
    per_h = summary["estimates"][0]["per_h"]
    assert all(entry["n"] == 4 for entry in per_h)
    assert all(entry["stderr"] > 0 for entry in per_h)


def test_homogenize_jobs_flag_equivalence(tmp_path):
    payload = dict(HOMOGENIZE_PERIODIC)
    payload["homogenize"] = {
        "xi_list": [[[1.0, 0.0], [0.0, 1.0]], [[1.1, 0.0], [0.0, 0.9]]],
        "m_list": [2, 4],
    }
    cfg = write_config(tmp_path, payload)
    out1, out2 = tmp_path / "seq", tmp_path / "par"
    assert main(["homogenize", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["homogenize", "--config", cfg, "--out", str(out2),
                 "--jobs", "2"]) == 0
    assert (out1 / "homogenize.csv").read_bytes() == (
        out2 / "homogenize.csv"
    ).read_bytes()
    assert (out1 / "summary.json").read_bytes() == (
        out2 / "summary.json"
    ).read_bytes()


def test_homogenize_all_cells_fail_exit_4(tmp_path):
    payload = {
        "model": {
            "pair": {"kind": "quadratic-spring", "stiffness": 1.0},
            "volumetric": {"K": 1.0, "eta": 0.0},
        },
        "mesh": {"kind": "periodic", "dim": 2, "m": 4, "diagonal": "nw"},
        "homogenize": {
            "xi_list": [[[-1.0, 0.0], [0.0, 1.0]]],
            "m_list": [2, 4],
        },
    }
    cfg = write_config(tmp_path, payload)
    assert main(["homogenize", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_homogenize_probes_in_summary(tmp_path):
    payload = dict(HOMOGENIZE_PERIODIC)
    payload["homogenize"] = {
        "xi_list": [[[1.1, 0.0], [0.0, 0.9]]],
        "m_list": [2, 4],
        "probes": {"frame_rotations": 3, "isotropy_rotations": 3, "seed": 1},
    }
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "out"
    assert main(["homogenize", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    probe = summary["probes"]["0"]
    assert probe["frame_invariance_deviation"] <= 1e-6
    assert probe["isotropy_deviation"] > 1e-3


def test_counterexample_cli(tmp_path, capsys):
    cfg = write_config(tmp_path, {"counterexample": {"stiffness": 1.0, "f": 1.0,
                                                     "m": 1, "diagonal": "nw"}})
    out = tmp_path / "out"
    assert main(["counterexample", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "counterexample.json").read_text())
    assert payload["ratio"] > 1.0
    cfg_ne = write_config(tmp_path, {"counterexample": {"diagonal": "ne"}},
                          "ne.json")
    out_ne = tmp_path / "out_ne"
    assert main(["counterexample", "--config", cfg_ne, "--out", str(out_ne)]) == 0
    payload_ne = json.loads((out_ne / "counterexample.json").read_text())
    assert payload_ne["ratio"] < 1.0
    assert abs(payload["ratio"] * payload_ne["ratio"] - 1.0) <= 1e-9


def test_counterexample_repeat_identical(tmp_path):
    cfg = write_config(tmp_path, {"counterexample": {}})
    out1, out2 = tmp_path / "c1", tmp_path / "c2"
    assert main(["counterexample", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["counterexample", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "counterexample.json").read_bytes() == (
        out2 / "counterexample.json"
    ).read_bytes()


def test_missing_config_file_exit_2(tmp_path):
    assert main(["mesh", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == 2
