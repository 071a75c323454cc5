"""
ABOUTME: End-to-end tests of the mbhm command line through click's CliRunner
ABOUTME: Covers prepare/fit/predict/validate/report, exit codes, the stale-draws guard and config commands
"""

import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from misuse_bhm import __version__
from misuse_bhm.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, cli
from misuse_bhm.utils.files import read_header


def _flat(output: str) -> str:
    """Output with all whitespace removed, so wrapped console lines still match."""
    return "".join(output.split())


def _write_config(path: Path, inputs, out: Path, **sampler) -> Path:
    config = {
        "inputs": inputs,
        "sampler": {"chains": 2, "iterations": 60, "warmup": 30, "thin": 1, "max_tree_depth": 6, "seed": 3,
                    **sampler},
        "output_dir": str(out),
    }
    path.write_text(yaml.safe_dump(config))
    return path


@pytest.fixture(scope="module")
def fitted_run(tmp_path_factory, synthetic):
    """A prepared and fitted run directory shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    paths = synthetic.write(root / "inputs")
    inputs = {
        "counties": str(paths["counties"]),
        "state_evidence": str(paths["state_evidence"]),
        "county_prev": str(paths["county_prev"]),
        "state_totals": str(paths["state_totals"]),
    }
    config = _write_config(root / "run.yaml", inputs, root / "run")
    runner = CliRunner()
    prepared = runner.invoke(cli, ["-c", str(config), "prepare"])
    assert prepared.exit_code == EXIT_OK, prepared.output
    fitted = runner.invoke(cli, ["-c", str(config), "fit"])
    return {"config": str(config), "out": root / "run", "fit": fitted, "inputs": inputs, "root": root}


def test_version():
    result = CliRunner().invoke(cli, ["--version"])
    assert result.exit_code == EXIT_OK
    assert __version__ in result.output


def test_help_lists_commands():
    result = CliRunner().invoke(cli, ["--help"])
    assert result.exit_code == EXIT_OK
    for command in ("prepare", "fit", "predict", "validate", "simulate", "report", "config"):
        assert command in result.output


def test_prepare_writes_the_prepared_dataset(fitted_run):
    data = fitted_run["out"] / "data"
    meta = json.loads((data / "dataset.json").read_text())
    assert meta["suppression_threshold"] == 9
    assert (data / "counties.csv").exists()


def test_prepared_files_carry_config_hash_and_seed(fitted_run):
    data = fitted_run["out"] / "data"
    stamp = json.loads((data / "dataset.json").read_text())["meta"]
    assert stamp["seed"] == 3
    convergence = json.loads((fitted_run["out"] / "convergence.json").read_text())
    assert stamp["config_hash"] == convergence["meta"]["config_hash"]
    for name in ("counties.csv", "state_evidence.csv", "county_prev.csv"):
        assert read_header(data / name) == {"config_hash": stamp["config_hash"], "seed": "3"}


def test_short_fit_finishes_without_passing_the_gate(fitted_run):
    result = fitted_run["fit"]
    assert result.exit_code == EXIT_NOT_CONVERGED, result.output
    out = fitted_run["out"]
    for name in ("config.yaml", "summary.csv", "convergence.json", "draws/drawset.json", "draws/chain_0.csv"):
        assert (out / name).exists(), name
    convergence = json.loads((out / "convergence.json").read_text())
    assert convergence["convergence"]["draws_per_chain"] == 30
    assert convergence["meta"]["seed"] == 3
    assert (out / "summary.csv").read_text().startswith("# config_hash=")


def test_predict_and_report(fitted_run):
    runner = CliRunner()
    predicted = runner.invoke(cli, ["-c", fitted_run["config"], "predict"])
    assert predicted.exit_code == EXIT_OK, predicted.output
    out = fitted_run["out"]
    assert (out / "predictions.csv").exists()
    assert (out / "aggregates.csv").exists()
    suppression = json.loads((out / "suppression.json").read_text())["suppression"]
    assert suppression["n_suppressed"] >= 0

    reported = runner.invoke(cli, ["-c", fitted_run["config"], "report", "--max-rows", "5"])
    assert reported.exit_code == EXIT_OK, reported.output
    text = (out / "report.md").read_text()
    assert "## Posterior summary" in text
    assert "Convergence gate NOT passed" in text


def test_changed_model_makes_stored_draws_stale(fitted_run):
    result = CliRunner().invoke(cli, ["-c", fitted_run["config"], "predict", "--reduced-model"])
    assert result.exit_code == EXIT_ERROR
    assert "re-runfit" in _flat(result.output)


def test_validate_residuals_reports_provisional_results(fitted_run):
    result = CliRunner().invoke(cli, ["-c", fitted_run["config"], "validate", "residuals"])
    assert result.exit_code == EXIT_NOT_CONVERGED, result.output
    validate = fitted_run["out"] / "validate"
    for name in ("residuals.csv", "residual_states.csv", "residual_regression.csv", "prevalence_residuals.csv"):
        assert (validate / name).exists(), name


def test_validate_ppc(fitted_run):
    result = CliRunner().invoke(cli, ["-c", fitted_run["config"], "validate", "ppc"])
    assert result.exit_code == EXIT_NOT_CONVERGED, result.output
    assert (fitted_run["out"] / "validate" / "ppc.csv").exists()


def test_validate_ppc_requires_state_totals(fitted_run):
    inputs = {k: v for k, v in fitted_run["inputs"].items() if k != "state_totals"}
    config = _write_config(fitted_run["root"] / "no_totals.yaml", inputs, fitted_run["out"])
    result = CliRunner().invoke(cli, ["-c", str(config), "validate", "ppc"])
    assert result.exit_code == EXIT_ERROR
    assert "state_totals" in _flat(result.output)


def test_unknown_validate_subcommand(fitted_run):
    result = CliRunner().invoke(cli, ["-c", fitted_run["config"], "validate", "bogus"])
    assert result.exit_code != EXIT_OK


def test_missing_input_file_names_the_path(tmp_path):
    config = _write_config(tmp_path / "run.yaml", {"counties": str(tmp_path / "missing_counties.csv")},
                           tmp_path / "run")
    result = CliRunner().invoke(cli, ["-c", str(config), "prepare"])
    assert result.exit_code == EXIT_ERROR
    assert "missing_counties.csv" in _flat(result.output)


def test_prepare_without_inputs(tmp_path):
    result = CliRunner().invoke(cli, ["prepare", "--out", str(tmp_path / "run")])
    assert result.exit_code == EXIT_ERROR
    assert "inputs.counties" in _flat(result.output)


def test_report_without_a_fit(tmp_path):
    result = CliRunner().invoke(cli, ["report", "--out", str(tmp_path / "empty")])
    assert result.exit_code == EXIT_ERROR


def test_iters_flag_defaults_warmup_to_half(tmp_path, raw_inputs):
    inputs = {k: raw_inputs[k] for k in ("counties", "state_evidence", "county_prev")}
    config = _write_config(tmp_path / "run.yaml", inputs, tmp_path / "run")
    result = CliRunner().invoke(cli, ["-c", str(config), "fit", "--iters", "10", "--chains", "1", "--format", "npz"])
    assert result.exit_code == EXIT_NOT_CONVERGED, result.output
    convergence = json.loads((tmp_path / "run" / "convergence.json").read_text())["convergence"]
    assert convergence["draws_per_chain"] == 5
    assert convergence["n_chains"] == 1
    assert (tmp_path / "run" / "draws" / "draws.npz").exists()


def test_simulate_writes_inputs_and_truth(tmp_path):
    target = tmp_path / "synthetic"
    result = CliRunner().invoke(cli, [
        "simulate", "--to", str(target), "--counties", "30", "--states", "3",
        "--evidence-states", "2", "--seed", "4", "--out", str(tmp_path / "run"),
    ])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("counties.csv", "state_evidence.csv", "county_prev.csv", "state_totals.csv", "truth.json"):
        assert (target / name).exists(), name
    truth = json.loads((target / "truth.json").read_text())["truth"]
    assert truth["beta0_p"] == pytest.approx(-2.90)


def test_simulate_warns_when_weakly_identified(tmp_path):
    result = CliRunner().invoke(cli, [
        "simulate", "--to", str(tmp_path / "s"), "--counties", "20", "--states", "3",
        "--evidence-states", "1", "--out", str(tmp_path / "run"),
    ])
    assert result.exit_code == EXIT_OK, result.output
    assert "weaklyidentified" in _flat(result.output)


def test_config_show_and_get(tmp_path):
    runner = CliRunner()
    shown = runner.invoke(cli, ["config", "show", "--chains", "3", "--out", str(tmp_path)])
    assert shown.exit_code == EXIT_OK
    assert "chains: 3" in shown.output

    value = runner.invoke(cli, ["config", "get", "sampler.warmup"])
    assert value.exit_code == EXIT_OK
    assert "25000" in value.output

    unknown = runner.invoke(cli, ["config", "get", "sampler.nope"])
    assert unknown.exit_code == EXIT_ERROR


def test_config_init_refuses_to_overwrite(tmp_path):
    runner = CliRunner()
    path = tmp_path / "mbhm.yaml"
    assert runner.invoke(cli, ["config", "init", str(path)]).exit_code == EXIT_OK
    written = yaml.safe_load(path.read_text())
    assert written["sampler"]["chains"] == 4
    assert runner.invoke(cli, ["config", "init", str(path)]).exit_code == EXIT_ERROR
    assert runner.invoke(cli, ["config", "init", str(path), "--force"]).exit_code == EXIT_OK
