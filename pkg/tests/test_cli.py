"""End-to-end checks of the command-line interface."""

import json
import math
import os

import numpy as np
import pytest

from ompath.cli import main, read_path_csv, write_path_csv
from ompath.model import DiscretePath, linear_path, uniform_grid


def run(args):
    return main([str(a) for a in args])


def sinh_csv(tmp_path, steps, name="sinh.csv"):
    grid = uniform_grid(steps)
    p = DiscretePath(grid=grid, values=(np.sinh(grid) / math.sinh(1.0)).reshape(-1, 1))
    f = tmp_path / name
    write_path_csv(str(f), p)
    return f


def test_simulate_writes_one_row_per_node(tmp_path):
    rc = run(["simulate", "--model", "zero_drift", "--x0", "0", "--steps", 1000,
              "--seed", 7, "--out-dir", tmp_path])
    assert rc == 0
    lines = (tmp_path / "sim_zero_drift_seed7.csv").read_text().splitlines()
    assert lines[0] == "t,x1"
    assert len(lines) == 1002  # header + N+1 nodes


def test_simulate_negative_vector_start(tmp_path):
    # "--x0 -2,-2" must survive argparse's option detection
    rc = run(["simulate", "--model", "example2", "--x0", "-2,-2", "--steps", 50,
              "--out-dir", tmp_path, "--out", "pair.csv"])
    assert rc == 0
    path = read_path_csv(str(tmp_path / "pair.csv"))
    assert path.dim == 2
    assert (tmp_path / "pair.csv").read_text().splitlines()[0] == "t,x1,x2"
    assert path.values[0] == pytest.approx(np.array([-2.0, -2.0]))


def test_simulate_repeats_bit_for_bit(tmp_path):
    for d in ("one", "two"):
        rc = run(["simulate", "--model", "example1", "--x0", "-2", "--steps", 200,
                  "--seed", 13, "--out-dir", tmp_path / d])
        assert rc == 0
    a = (tmp_path / "one" / "sim_example1_seed13.csv").read_bytes()
    b = (tmp_path / "two" / "sim_example1_seed13.csv").read_bytes()
    assert a == b


def test_mpp_default_endpoints_and_dual_route_record(tmp_path):
    rc = run(["mpp", "--model", "example1", "--steps", 100, "--out-dir", tmp_path])
    assert rc == 0
    path = read_path_csv(str(tmp_path / "mpp_example1.csv"))
    assert path.values[0, 0] == -2.0 and path.values[-1, 0] == 2.0
    rec = json.loads((tmp_path / "mpp_example1.json").read_text())
    assert rec["model"] == "example1"
    assert rec["start"] == [-2.0] and rec["end"] == [2.0]
    assert rec["converged"] is True
    assert rec["grad_max"] <= 1e-6
    assert set(rec["om"]) == {"total", "drift_term", "divergence_term", "grid_size"}
    el = rec["euler_lagrange"]
    assert el["route"] == "shooting"
    assert el["sup_gap_to_minimizer"] < 5e-2
    assert (tmp_path / el["path_csv"]).exists()


def test_mpp_linear_model_matches_closed_form(tmp_path):
    rc = run(["mpp", "--model", "linear_test", "--start", "0", "--end", "1",
              "--steps", 200, "--out-dir", tmp_path, "--out", "lin"])
    assert rc == 0
    path = read_path_csv(str(tmp_path / "lin.csv"))
    exact = np.sinh(path.grid) / math.sinh(1.0)
    assert np.max(np.abs(path.values[:, 0] - exact)) <= 1e-3


def test_mpp_parameter_sweep_names_each_run(tmp_path):
    rc = run(["mpp", "--model", "example2", "--a", "1,2", "--steps", 64,
              "--out-dir", tmp_path])
    assert rc == 0
    for stem in ("mpp_example2_a1_b1", "mpp_example2_a2_b1"):
        assert (tmp_path / f"{stem}.csv").exists()
        assert json.loads((tmp_path / f"{stem}.json").read_text())["converged"]


def test_mpp_budget_exhaustion_reports_and_exits_nonzero(tmp_path):
    rc = run(["mpp", "--model", "example1", "--steps", 100, "--max-iters", 3,
              "--skip-el", "--out-dir", tmp_path, "--out", "budget"])
    assert rc == 4
    rec = json.loads((tmp_path / "budget.json").read_text())
    assert rec["converged"] is False
    assert rec["iterations"] == 3


def test_om_eval_constant_path(tmp_path, capsys):
    grid = uniform_grid(1000)
    f = tmp_path / "const.csv"
    write_path_csv(str(f), DiscretePath(grid=grid, values=np.full((1001, 1), -2.0)))
    rc = run(["om-eval", "--model", "example1", "--path", f])
    assert rc == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["total"] == pytest.approx(-4.0, abs=1e-6)
    assert ev["drift_term"] == 0.0


def test_om_eval_zero_path_zero_drift(tmp_path, capsys):
    f = tmp_path / "zero.csv"
    write_path_csv(str(f), linear_path(np.zeros(1), np.zeros(1), 64))
    rc = run(["om-eval", "--model", "zero_drift", "--path", f, "--out", tmp_path / "ev.json"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["total"] == 0.0
    assert json.loads((tmp_path / "ev.json").read_text())["total"] == 0.0


def test_simulate_then_om_eval_roundtrip(tmp_path, capsys):
    rc = run(["simulate", "--model", "linear_test", "--x0", "0.5", "--steps", 64,
              "--seed", 3, "--out-dir", tmp_path, "--out", "traj.csv"])
    assert rc == 0
    capsys.readouterr()  # drop the path simulate printed
    rc = run(["om-eval", "--model", "linear_test", "--path", tmp_path / "traj.csv"])
    assert rc == 0
    ev = json.loads(capsys.readouterr().out)
    assert math.isfinite(ev["total"])
    assert ev["drift_term"] >= 0.0
    assert ev["grid_size"] == 64


def test_tube_ratio_of_identical_tubes(tmp_path):
    f = sinh_csv(tmp_path, 2)
    rc = run(["tube", "--model", "linear_test", "--path", f, "--path2", f,
              "--epsilon", "0.5", "--samples", 2000, "--seed", 4,
              "--out-dir", tmp_path, "--out", "self.json"])
    assert rc == 0
    check = json.loads((tmp_path / "self.json").read_text())
    assert check["log_prob_ratio"] == 0.0
    assert check["om_prediction"] == 0.0
    assert check["inconclusive"] is False
    assert check["estimate_1"]["hits"] == check["estimate_2"]["hits"] > 0


def test_tube_epsilon_ladder_csv(tmp_path):
    f1 = sinh_csv(tmp_path, 2)
    f2 = tmp_path / "line.csv"
    write_path_csv(str(f2), linear_path(np.zeros(1), np.ones(1), 2))
    rc = run(["tube", "--model", "linear_test", "--path", f1, "--path2", f2,
              "--epsilon", "0.5,0.35,0.25", "--samples", 20000, "--seed", 2,
              "--out-dir", tmp_path])
    assert rc == 0
    lines = (tmp_path / "tube_ladder_linear_test.csv").read_text().splitlines()
    assert lines[0] == "epsilon,hits1,hits2,log_ratio,om_prediction,stderr"
    rows = [line.split(",") for line in lines[1:]]
    assert [float(r[0]) for r in rows] == [0.5, 0.35, 0.25]
    hits1 = [int(r[1]) for r in rows]
    assert hits1 == sorted(hits1, reverse=True)  # shared ensemble, shrinking tube
    assert len({r[4] for r in rows}) == 1


def test_unknown_model_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        run(["simulate", "--model", "nope", "--x0", "0", "--out-dir", tmp_path])
    assert e.value.code == 2


def test_missing_path_file_is_a_usage_error():
    assert run(["om-eval", "--model", "example1", "--path", "/no/such/file.csv"]) == 2


def test_divergent_simulation_is_a_numerical_error(tmp_path):
    rc = run(["simulate", "--model", "example1", "--x0", "90000", "--steps", 1000,
              "--out-dir", tmp_path])
    assert rc == 3


def test_config_file_sets_defaults_but_flags_win(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for quick runs\nsteps = 12\nseed = 5\n")
    rc = run(["--config", cfg, "simulate", "--model", "zero_drift", "--x0", "0",
              "--steps", 20, "--out-dir", tmp_path])
    assert rc == 0
    out = tmp_path / "sim_zero_drift_seed5.csv"  # seed from config
    assert out.exists()
    assert len(out.read_text().splitlines()) == 22  # steps from the flag


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    rc = run(["--config", cfg, "simulate", "--model", "zero_drift", "--x0", "0",
              "--out-dir", tmp_path])
    assert rc == 2


def test_thread_cap_does_not_change_results(tmp_path, monkeypatch):
    f = tmp_path / "zero.csv"
    write_path_csv(str(f), linear_path(np.zeros(1), np.zeros(1), 8))
    rc = run(["tube", "--model", "zero_drift", "--path", f, "--epsilon", "2.5",
              "--samples", 2000, "--seed", 5, "--out-dir", tmp_path, "--out", "a.json"])
    assert rc == 0
    monkeypatch.setenv("OMPATH_THREADS", "2")
    rc = run(["tube", "--model", "zero_drift", "--path", f, "--epsilon", "2.5",
              "--samples", 2000, "--seed", 5, "--out-dir", tmp_path, "--out", "b.json"])
    assert rc == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
