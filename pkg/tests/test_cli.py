"""Command line front end: file formats, exit codes, determinism."""

import numpy as np
import pytest
import yaml

from nic import fileio
from nic.cli import main
from nic.identify import DataSet
from nic.poly import AffineScaler, BasisTerm, PolyModel

BASE_CONFIG = {
    "data": {
        "plant": {"name": "linear1", "params": {"a": 0.5, "b": 0.3},
                  "xi_bound": 0.0},
        "excitation": {"kind": "uniform", "length": 80,
                       "u_min": -1.0, "u_max": 1.0},
        "seed": 11,
        "y0": 0.0,
    },
    "identify": {"data": "data.csv", "degree": 3, "n_max": 2},
    "controller": {"u_min": -1.0, "u_max": 1.0, "mu": 0.0},
    "validate": {"model": "model.yaml", "data": "data.csv", "m": 4,
                 "eps": 0.4, "mu_grid": [0.0, 0.01]},
    "simulate": {
        "model": "model.yaml",
        "scenarios": [
            {"name": "sine", "horizon": 60, "y0": 0.0,
             "reference": {"kind": "sine", "amplitude": 0.15, "period": 40},
             "plant": {"name": "linear1", "params": {"a": 0.5, "b": 0.3}},
             "seed": 3},
        ],
    },
}


def write_config(tmp_path, overrides=None, name="config.yaml"):
    cfg = yaml.safe_load(yaml.safe_dump(BASE_CONFIG))
    for key, val in (overrides or {}).items():
        cfg[key] = val
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture
def workspace(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["generate-data", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 0
    return tmp_path, cfg


class TestGenerateData:
    def test_row_count_and_header(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["generate-data", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "data.csv").read_text().strip().splitlines()
        assert lines[0] == "t,u,y"
        assert len(lines) == 81

    def test_length_ten_gives_ten_rows(self, tmp_path):
        short = yaml.safe_load(yaml.safe_dump(BASE_CONFIG))
        short["data"]["excitation"]["length"] = 10
        cfg = tmp_path / "short.yaml"
        cfg.write_text(yaml.safe_dump(short))
        assert main(["generate-data", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "data.csv").read_text().strip().splitlines()
        assert len(lines) == 11  # header plus ten data rows

    def test_round_trip(self, workspace):
        tmp_path, _ = workspace
        data = fileio.load_dataset_csv(tmp_path / "data.csv")
        fileio.write_dataset_csv(tmp_path / "copy.csv", data)
        again = fileio.load_dataset_csv(tmp_path / "copy.csv")
        np.testing.assert_array_equal(data.u, again.u)
        np.testing.assert_array_equal(data.y, again.y)

    def test_seeds_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(["generate-data", "--config", str(cfg), "--out",
                     str(out1), "--seed", "1"]) == 0
        assert main(["generate-data", "--config", str(cfg), "--out",
                     str(out2), "--seed", "2"]) == 0
        assert (out1 / "data.csv").read_bytes() != (out2 / "data.csv").read_bytes()

    def test_same_seed_identical_bytes(self, tmp_path):
        cfg = write_config(tmp_path)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            assert main(["generate-data", "--config", str(cfg), "--out",
                         str(out), "--seed", "7"]) == 0
        assert (out1 / "data.csv").read_bytes() == (out2 / "data.csv").read_bytes()

    def test_divergent_plant_domain_failure(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"data": {
            "plant": {"name": "linear1", "params": {"a": 3.0, "b": 1.0}},
            "excitation": {"kind": "steps", "length": 100,
                           "u_min": 0.5, "u_max": 1.0},
            "seed": 1, "y0": 1.0}})
        assert main(["generate-data", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 1


class TestIdentify:
    def test_planted_linear_reports_first_order(self, workspace):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        report = yaml.safe_load((tmp_path / "identify_report.yaml").read_text())
        assert report["success"] is True
        assert report["trace"][0]["n"] == 1
        model, diag = fileio.load_model(tmp_path / "model.yaml")
        assert model.order == 1
        assert diag["gamma_y"] < 1.0

    def test_model_file_round_trip(self, workspace, rng):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        model, _ = fileio.load_model(tmp_path / "model.yaml")
        fileio.save_model(tmp_path / "model2.yaml", model)
        again, _ = fileio.load_model(tmp_path / "model2.yaml")
        pts = rng.uniform(-1, 1, size=(100, model.n_vars))
        np.testing.assert_array_equal(model.predict_many(pts),
                                      again.predict_many(pts))

    def test_empty_csv_is_usage_error(self, tmp_path, capsys):
        (tmp_path / "data.csv").write_text("")
        cfg = write_config(tmp_path)
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "data.csv" in err and ":1" in err

    def test_malformed_row_names_line(self, tmp_path, capsys):
        (tmp_path / "data.csv").write_text("t,u,y\n0,0.1,0.2\n1,oops,0.3\n")
        cfg = write_config(tmp_path)
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2
        assert ":3" in capsys.readouterr().err

    def test_identification_failure_exit_code(self, workspace, monkeypatch):
        tmp_path, cfg = workspace
        import nic.cli as cli_mod
        from nic.identify import IdentResult

        def fake_identify(data, icfg):
            return IdentResult(model=None, eta=float("nan"),
                               gamma_y=float("inf"), rho=float("nan"),
                               success=False, trace=[], notes=["forced"])

        monkeypatch.setattr(cli_mod, "identify_model", fake_identify)
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 1
        # the report is still written
        assert (tmp_path / "identify_report.yaml").exists()


class TestValidateCommand:
    def test_stable_verdict_flow(self, workspace):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        assert main(["validate", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        report = yaml.safe_load(
            (tmp_path / "validation_report.yaml").read_text())
        assert report["verdict"] == "validated-stable"
        assert len(report["grid"]) == 2
        assert report["margin"] > 0

    def test_refuses_gamma_above_one(self, workspace, capsys):
        tmp_path, cfg = workspace
        model = PolyModel(order=1, degree=1, terms=[BasisTerm((0, 1))],
                          alpha=np.array([1.0]),
                          scaler=AffineScaler.identity(2))
        fileio.save_model(tmp_path / "model.yaml", model, eta=0.1,
                          gamma_y=1.5, rho=1.05)
        assert main(["validate", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 1
        assert "gamma_y" in capsys.readouterr().err

    def test_unknown_model_field_rejected(self, workspace):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        payload = yaml.safe_load((tmp_path / "model.yaml").read_text())
        payload["surprise"] = 1
        (tmp_path / "model.yaml").write_text(yaml.safe_dump(payload))
        assert main(["validate", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2


class TestSimulateCommand:
    def test_writes_trajectories_and_metrics(self, workspace):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        traj = (tmp_path / "traj_sine.csv").read_text().splitlines()
        assert traj[0] == "t,r,y,u,xi,J,saturated"
        assert len(traj) == 61
        report = yaml.safe_load((tmp_path / "metrics.yaml").read_text())
        assert set(report["sine"]) == {"rms_error", "linf_error",
                                       "command_energy", "saturation_duty",
                                       "steps", "diverged"}

    def test_missing_model_is_usage_error(self, workspace):
        tmp_path, cfg = workspace
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_bad_scenarios_listed_all_at_once(self, workspace, capsys):
        tmp_path, cfg = workspace
        assert main(["identify", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        bad = yaml.safe_load(cfg.read_text())
        bad["simulate"]["scenarios"] = [
            {"name": "neg", "horizon": -5,
             "plant": {"name": "linear1", "params": {}}},
            {"name": "ghost", "horizon": 10,
             "plant": {"name": "does-not-exist", "params": {}}},
        ]
        cfg2 = tmp_path / "bad.yaml"
        cfg2.write_text(yaml.safe_dump(bad))
        assert main(["simulate", "--config", str(cfg2),
                     "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "neg" in err and "does-not-exist" in err


class TestContract:
    def test_unknown_command_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["identify", "--config", str(tmp_path / "nope.yaml"),
                     "--out", str(tmp_path)]) == 2

    def test_identify_deterministic_outputs(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            out.mkdir()
            assert main(["generate-data", "--config", str(cfg),
                         "--out", str(out)]) == 0
            local = write_config(out, {"identify": {
                "data": str(out / "data.csv"), "degree": 3, "n_max": 2}},
                name="local.yaml")
            assert main(["identify", "--config", str(local),
                         "--out", str(out)]) == 0
        assert (out1 / "model.yaml").read_bytes() == \
            (out2 / "model.yaml").read_bytes()
