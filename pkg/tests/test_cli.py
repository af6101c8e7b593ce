"""Command-line interface: subcommands, outputs, exit codes."""

import json
import os

import pytest

from marginlab import Architecture, ClipSpec, save_parametrization, uniform_parametrization
from marginlab.cli import main


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return str(path)


@pytest.fixture
def affine_descriptor(tmp_path):
    return write_json(tmp_path / "dist.json", {"kind": "affine", "params": {"d": 1}})


class TestExitCodes:
    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["no-such-command"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file_is_usage_error(self, capsys):
        assert main(["bounds", "eval", "--inputs", "/nonexistent.json"]) == 1

    def test_bad_config_exit_one(self, tmp_path, capsys):
        config = write_json(tmp_path / "config.json", {"n_grid": [1, 2]})
        code = main(["experiment", "run", "--config", config, "--out", str(tmp_path / "out")])
        assert code == 1
        assert ".n_grid" in capsys.readouterr().err

    def test_success_exit_zero(self, affine_descriptor, capsys):
        code = main(["diagnose", "margin", "--dist", affine_descriptor, "--m", "5000", "--seed", "3"])
        assert code == 0


class TestBoundsEval:
    def test_generic_bound_json(self, tmp_path, capsys):
        inputs = write_json(
            tmp_path / "inputs.json",
            {
                "kind": "generic",
                "regime": "hard-margin",
                "widths": [2, 3, 1],
                "R": 1.0,
                "separation_const": 1.0,
                "separation_power": 2.0,
                "margin": 0.5,
                "level": 0.25,
                "sample_size": 10000,
            },
        )
        assert main(["bounds", "eval", "--inputs", inputs]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["regime"] == "hard-margin"
        assert set(doc["terms"]) == {"approximation", "margin_ratio", "statistical"}
        assert "log" in doc["total"]

    def test_sizing_json(self, tmp_path, capsys):
        inputs = write_json(
            tmp_path / "sizing.json",
            {
                "kind": "sizing",
                "target_rate": 0.05,
                "smoothness": 1.0,
                "dim": 1,
                "p": 2.0,
                "depth_factor": 2,
                "separation_power": 2.0,
                "norm_scale": 1.0,
                "regression_norm": 1.0,
                "n_grid": [100, 1000],
            },
        )
        assert main(["bounds", "eval", "--inputs", inputs]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["rate_ceiling_hard_margin"] == pytest.approx(1.0 / 12.0)
        assert len(doc["per_n"]) == 2

    def test_ideal_json(self, tmp_path, capsys):
        inputs = write_json(
            tmp_path / "ideal.json",
            {
                "kind": "ideal",
                "widths": [2, 3, 1],
                "R": 1.0,
                "margin": 0.5,
                "separation_const": 1.0,
                "separation_power": 2.0,
                "p": 2.0,
                "sample_size": 1000,
            },
        )
        assert main(["bounds", "eval", "--inputs", inputs]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert "decay_rate" in doc and "prefactor" in doc

    def test_missing_kind_usage_error(self, tmp_path, capsys):
        inputs = write_json(tmp_path / "x.json", {"widths": [2, 1]})
        assert main(["bounds", "eval", "--inputs", inputs]) == 1


class TestDiagnoseMargin:
    def test_affine_fit_near_one(self, affine_descriptor, capsys):
        code = main(
            ["diagnose", "margin", "--dist", affine_descriptor, "--m", "200000", "--seed", "0"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert abs(doc["fit"]["exponent"] - 1.0) < 0.1
        assert len(doc["curve"]) == 9

    def test_hard_margin_signals_undefined(self, tmp_path, capsys):
        descriptor = write_json(
            tmp_path / "hm.json",
            {"kind": "constant-margin", "params": {"delta": 0.5, "d": 1}},
        )
        code = main(["diagnose", "margin", "--dist", descriptor, "--m", "10000", "--seed", "0"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["fit"]["outcome"] == "exponent-undefined"

    def test_curve_csv_out(self, affine_descriptor, tmp_path, capsys):
        out = str(tmp_path / "curve.csv")
        code = main(
            [
                "diagnose", "margin", "--dist", affine_descriptor,
                "--m", "5000", "--seed", "0", "--thresholds", "0.2,0.5,0.8",
                "--out", out,
            ]
        )
        assert code == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "t,prob,stderr"
        assert len(lines) == 4


class TestDistributionSample:
    def test_writes_csv_and_sidecar(self, affine_descriptor, tmp_path, capsys):
        out = str(tmp_path / "data.csv")
        code = main(
            ["distribution", "sample", "--dist", affine_descriptor, "--n", "100", "--seed", "5", "--out", out]
        )
        assert code == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "x1,y"
        assert len(lines) == 101
        sidecar = json.loads(open(tmp_path / "data.json").read())
        assert sidecar == {"seed": 5, "kind": "affine"}


class TestExperimentAndRates:
    def test_run_then_refit(self, tmp_path, capsys):
        teacher = uniform_parametrization(Architecture((2, 3, 1)), 1.0, 18)
        save_parametrization(tmp_path / "teacher.json", teacher, ClipSpec(1.0))
        config = write_json(
            tmp_path / "config.json",
            {
                "distribution": {
                    "kind": "teacher",
                    "teacher_file": "teacher.json",
                    "params": {"marginal": {"kind": "uniform", "d": 2}},
                },
                "architecture": {"widths": [2, 3, 1]},
                "train": {
                    "lambda": 0.0, "p": 2.0, "R": 2.0, "restarts": 2,
                    "max_iters": 150, "grad_tol": 1e-4, "tie_tol": 1e-6,
                    "smoothing_mu": 1e-8, "seed": 0,
                },
                "n_grid": [30, 60, 90],
                "eval_m": 2000,
                "replicates": 1,
                "master_seed": 4,
            },
        )
        out = str(tmp_path / "out")
        assert main(["experiment", "run", "--config", config, "--out", out]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["cells"] == 3
        results = os.path.join(out, "results.csv")
        assert os.path.exists(results)
        assert os.path.exists(os.path.join(out, "rates.json"))

        assert main(["rates", "fit", results]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["outcome"] in ("fit", "floor")
        assert doc == json.loads(open(os.path.join(out, "rates.json")).read())

    def test_workers_env_fallback(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MRL_WORKERS", "not-a-number")
        config = write_json(tmp_path / "c.json", {})
        code = main(["experiment", "run", "--config", config, "--out", str(tmp_path / "o")])
        assert code == 1  # MRL_WORKERS parse failure or config error, both usage
