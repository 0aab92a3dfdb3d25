import json

import numpy as np
import pytest

from maxscore.arrays import MultiIndexGrid, materialize
from maxscore.cli import (
    ValidationError,
    load_dataset,
    read_report,
    run_command,
    save_dataset,
)
from maxscore.dgp import DgpSpec


@pytest.fixture()
def data_file(tmp_path):
    path = str(tmp_path / "sim.csv")
    assert run_command([
        "simulate", "--dgp", "add-shock", "--n", "12", "--seed", "3",
        "--out", path,
    ]) == 0
    return path


class TestDatasetIo:
    def test_round_trip(self, tmp_path):
        spec = DgpSpec(variant="iid")
        data = materialize(spec, MultiIndexGrid((7, 5)), seed=2)
        path = str(tmp_path / "d.csv")
        save_dataset(data, path)
        back, info = load_dataset(path)
        assert np.array_equal(back.indices, data.indices)
        assert np.array_equal(back.y, data.y)
        assert np.array_equal(back.x, data.x)
        assert info["grid"] == [7, 5]
        assert info["fill_rate"] == 1.0

    def test_refuses_overwrite(self, tmp_path):
        spec = DgpSpec(variant="iid")
        data = materialize(spec, MultiIndexGrid((3, 3)), seed=0)
        path = str(tmp_path / "d.csv")
        save_dataset(data, path)
        with pytest.raises(ValidationError):
            save_dataset(data, path)
        save_dataset(data, path, force=True)

    def test_y01_mapping(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("i1,i2,y,x1\n1,1,0,0.5\n1,2,1,-0.5\n")
        data, _ = load_dataset(str(path), y01=True)
        assert list(data.y) == [-1, 1]
        with pytest.raises(ValidationError, match=":2:"):
            load_dataset(str(path))

    def test_duplicate_cell_names_both_rows(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("i1,i2,y,x1\n1,1,1,0.5\n2,1,-1,0.3\n1,1,-1,0.1\n")
        with pytest.raises(ValidationError, match=r":4: duplicate cell \(1, 1\) \(first at row 2\)"):
            load_dataset(str(path))

    def test_nonfinite_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("i1,y,x1,x2\n1,1,0.5,nan\n")
        with pytest.raises(ValidationError, match=":2: non-finite x2"):
            load_dataset(str(path))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c\n1,1,1\n")
        with pytest.raises(ValidationError, match="header"):
            load_dataset(str(path))

    def test_require_balanced(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("i1,i2,y,x1\n1,1,1,0.5\n2,2,-1,0.3\n")
        data, info = load_dataset(str(path))
        assert info["fill_rate"] == 0.5
        with pytest.raises(ValidationError):
            load_dataset(str(path), require_balanced=True)

    def test_missing_file(self):
        with pytest.raises(ValidationError):
            load_dataset("/nonexistent/nope.csv")


class TestEstimateCommand:
    def test_deterministic_rerun(self, data_file, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert run_command([
                "estimate", "--data", data_file, "--theta-ref", "1,1",
                "--out", str(out),
            ]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_report_contents(self, data_file, tmp_path):
        out = str(tmp_path / "r.json")
        run_command(["estimate", "--data", data_file, "--out", out])
        rep = read_report(out)
        assert rep["command"] == "estimate"
        assert rep["config"]["method"] == "sweep"
        b = np.array(rep["beta_hat"])
        assert np.linalg.norm(b) == pytest.approx(1.0)
        assert rep["dataset"]["n_records"] == 144

    def test_methods_agree_on_objective(self, data_file, tmp_path):
        reps = []
        for method in ("sweep", "enumerate"):
            out = str(tmp_path / f"{method}.json")
            run_command(["estimate", "--data", data_file, "--method", method,
                         "--out", out])
            reps.append(read_report(out))
        assert reps[0]["objective"] == reps[1]["objective"]

    def test_constraint_flag_validation(self, data_file):
        assert run_command([
            "estimate", "--data", data_file, "--constraint", "hemisphere",
        ]) == 2
        assert run_command([
            "estimate", "--data", data_file, "--constraint", "component-bound",
            "--component", "0",
        ]) == 2

    def test_component_bound_respected(self, data_file, tmp_path):
        out = str(tmp_path / "c.json")
        assert run_command([
            "estimate", "--data", data_file, "--constraint", "component-bound",
            "--component", "0", "--bound", "0.9", "--out", out,
        ]) == 0
        rep = read_report(out)
        assert abs(rep["beta_hat"][0]) >= 0.9

    def test_unknown_flag_exits_2(self, data_file):
        assert run_command(["estimate", "--data", data_file, "--bogus"]) == 2

    def test_refuse_overwrite_exit_2(self, data_file, tmp_path):
        out = str(tmp_path / "r.json")
        assert run_command(["estimate", "--data", data_file, "--out", out]) == 0
        assert run_command(["estimate", "--data", data_file, "--out", out]) == 2
        assert run_command(["estimate", "--data", data_file, "--out", out,
                            "--force"]) == 0


class TestBootstrapCommand:
    def test_report_and_draws(self, data_file, tmp_path):
        out = str(tmp_path / "b.json")
        draws = str(tmp_path / "draws.csv")
        assert run_command([
            "bootstrap", "--data", data_file, "--B", "30", "--seed", "4",
            "--theta-ref", "1,1", "--levels", "0.9",
            "--out", out, "--draws-out", draws,
        ]) == 0
        rep = read_report(out)
        assert rep["config"]["B"] == 30
        lo, hi = rep["intervals"]["0.9"][0]["percentile"]
        assert lo <= hi
        lines = open(draws).read().splitlines()
        assert lines[0] == "replicate,theta1,beta1,beta2"
        assert len(lines) == 31

    def test_deterministic(self, data_file, tmp_path):
        blobs = []
        for name in ("1.json", "2.json"):
            out = tmp_path / name
            run_command(["bootstrap", "--data", data_file, "--B", "25",
                         "--seed", "7", "--out", str(out)])
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestMonteCarloCommand:
    def test_rate_config_end_to_end(self, tmp_path):
        cfg = tmp_path / "rate.cfg"
        cfg.write_text(
            "study = rate  # convergence check\n"
            "variant = iid\n"
            "sizes = 8,16,32\n"
            "reps = 50\n"
            "seed = 1\n"
            "layout = row\n"
        )
        out = str(tmp_path / "rate")
        assert run_command(["montecarlo", "--config", str(cfg), "--out", out]) == 0
        rep = read_report(out + ".json")
        assert rep["config"]["variant"] == "iid"
        assert "workers" not in rep["config"]
        assert rep["slope"] < 0.0
        lines = open(out + ".csv").read().splitlines()
        assert lines[0] == "n,rmse_theta,rmse_angle,reps_done"
        assert len(lines) == 4

    def test_workers_do_not_change_bytes(self, tmp_path):
        blobs = []
        for w in (1, 2):
            cfg = tmp_path / f"w{w}.cfg"
            cfg.write_text(
                f"study = rate\nvariant = iid\nsizes = 8,16,32\nreps = 50\n"
                f"seed = 1\nlayout = row\nworkers = {w}\n"
            )
            out = tmp_path / f"out{w}"
            assert run_command(["montecarlo", "--config", str(cfg),
                                "--out", str(out)]) == 0
            blobs.append((out.with_suffix(".json").read_bytes(),
                          out.with_suffix(".csv").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_config_errors(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("study = rate\nvariant = iid\nsizes = 8,16,32\nreps = 50\nwat = 1\n")
        assert run_command(["montecarlo", "--config", str(bad),
                            "--out", str(tmp_path / "x")]) == 2
        missing = tmp_path / "missing.cfg"
        missing.write_text("study = rate\nvariant = iid\n")
        assert run_command(["montecarlo", "--config", str(missing),
                            "--out", str(tmp_path / "y")]) == 2


class TestSmallCommands:
    def test_hoeffding_check_exact(self, tmp_path):
        out = str(tmp_path / "h.json")
        assert run_command([
            "hoeffding-check", "--dgp", "discrete-test", "--n", "6",
            "--seed", "2", "--out", out,
        ]) == 0
        rep = read_report(out)
        assert abs(rep["residual"]) < 1e-12
        assert set(rep["h"]) == {"(0, 1)", "(1, 0)", "(1, 1)"}

    def test_oracle_stdout(self, capsys):
        assert run_command([
            "oracle", "--dgp", "mult-scale", "--u-draws", "200",
        ]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["v"] == [[0.0]]

    def test_oracle_add_shock_file(self, tmp_path):
        out = str(tmp_path / "o.json")
        assert run_command([
            "oracle", "--dgp", "add-shock", "--u-draws", "500",
            "--seed", "1", "--out", out,
        ]) == 0
        rep = read_report(out)
        assert rep["hessian"][0][0] == pytest.approx(1.0 / np.pi, abs=1e-9)
        assert rep["v"][0][0] > 0.0

    def test_simulate_refuses_overwrite(self, data_file):
        assert run_command([
            "simulate", "--dgp", "add-shock", "--n", "12", "--seed", "3",
            "--out", data_file,
        ]) == 2
