import json

import pytest

from ntk_convergence.config import parse_document
from ntk_convergence.exceptions import ValidationError
from ntk_convergence.interfaces import CheckReport, Verdict
from ntk_convergence.main import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_ERROR,
    EXIT_NUMERICAL,
    EXIT_OK,
    ExperimentRunner,
    build_parser,
    main,
)

REGRESSION = """
mode = regression-gd
n = 4
d = 2
m = 64
seed = 3
iters = 20
"""


def _config(text, out_dir, **overrides):
    return parse_document(text, {"out_dir": str(out_dir), **overrides})


def _load(path):
    return json.loads(path.read_text())


async def test_regression_run_writes_outputs(tmp_path):
    """Test the files and manifest of a regression GD run."""
    manifest = await ExperimentRunner(_config(REGRESSION, tmp_path)).run()
    assert manifest.exit_code == EXIT_OK
    listed = {entry["name"] for entry in manifest.outputs}
    assert listed == {"dataset.json", "params0.json", "gram.json", "trace.csv", "trace.json"}
    stored = _load(tmp_path / "manifest.json")
    assert stored["status"] == "ok"
    assert stored["seeds"]["seed"] == 3
    assert parse_document(stored["resolved_config"]) == manifest.config
    assert len((tmp_path / "trace.csv").read_text().splitlines()) == 22


async def test_runs_are_deterministic(tmp_path):
    """Test that two runs of one configuration write identical traces."""
    first = await ExperimentRunner(_config(REGRESSION, tmp_path / "a")).run()
    second = await ExperimentRunner(_config(REGRESSION, tmp_path / "b")).run()
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    assert first.outputs == second.outputs


async def test_check_suite_is_deterministic(tmp_path):
    """Test that rerunning a check suite rewrites every check report and the rollup byte for byte."""
    text = REGRESSION.replace("regression-gd", "check-suite").replace("iters = 20", "iters = 50")
    text += "problem = regression\nchecks = gram_concentration, gram_stability, gd_convergence\n"
    text += "m_grid = 16, 32, 64, 128\ntrials = 2\nperturbations = 2\n"
    config = _config(text, tmp_path)
    await ExperimentRunner(config).run()
    produced = sorted(p.name for p in tmp_path.glob("check_*.json")) + ["rollup.json"]
    assert len(produced) == 4
    first = {name: (tmp_path / name).read_bytes() for name in produced}
    await ExperimentRunner(config).run()
    assert {name: (tmp_path / name).read_bytes() for name in produced} == first


async def test_gram_report(tmp_path):
    """Test that gram-report writes only the dataset and Gram matrix."""
    text = REGRESSION.replace("regression-gd", "gram-report") + "problem = regression\n"
    await ExperimentRunner(_config(text, tmp_path)).run()
    gram = _load(tmp_path / "gram.json")
    assert gram["method"] == "closed-form"
    assert gram["lambda0"] > 0
    assert not (tmp_path / "trace.csv").exists()


async def test_pinn_ngd_run(tmp_path):
    """Test a short NGD run on a PINN."""
    text = """
mode = pinn-ngd
n1 = 4
n2 = 4
d = 1
m = 32
seed = 0
activation = tanh
eta_mode = fixed
eta = 0.5
iters = 5
"""
    manifest = await ExperimentRunner(_config(text, tmp_path)).run()
    assert manifest.exit_code == EXIT_OK
    header = (tmp_path / "trace.csv").read_text().splitlines()[0].split(",")
    assert "lin_defect" in header
    assert _load(tmp_path / "trace.json")["optimizer"] == "ngd"


async def test_pinn_check_suite(tmp_path):
    """Test a PINN check suite with a skipped quadratic check."""
    text = """
mode = check-suite
problem = pinn
n1 = 4
n2 = 4
d = 1
m = 64
seed = 0
n_mc = 2000
perturbations = 3
checks = initial_scale, ngd_quadratic
"""
    manifest = await ExperimentRunner(_config(text, tmp_path)).run()
    assert manifest.exit_code == EXIT_OK
    rollup = _load(tmp_path / "rollup.json")
    assert rollup["checks"] == {"initial_scale": "report-only", "ngd_quadratic": "report-only"}
    assert "skipped" in _load(tmp_path / "check_ngd_quadratic.json")["context"]
    assert "width_requirements" in _load(tmp_path / "gram.json")


async def test_failed_check_sets_exit_code(tmp_path, mocker):
    """Test exit code 2 when a gated check fails."""
    text = REGRESSION.replace("regression-gd", "check-suite") + "problem = regression\nchecks = gram_concentration\n"
    failing = CheckReport("gram_concentration", 1.0, 0.5, -0.5, Verdict.FAIL)
    mocker.patch("ntk_convergence.theory.check_gram_concentration", return_value=failing)
    manifest = await ExperimentRunner(_config(text, tmp_path)).run()
    assert manifest.exit_code == EXIT_CHECK_FAILED
    assert _load(tmp_path / "rollup.json")["failed"] == ["gram_concentration"]


async def test_library_error_still_writes_manifest(tmp_path, mocker):
    """Test that a validation error raised inside a check exits 1 with a manifest on disk."""
    text = REGRESSION.replace("regression-gd", "check-suite") + "problem = regression\nchecks = gram_concentration\n"
    mocker.patch("ntk_convergence.theory.check_gram_concentration",
                 side_effect=ValidationError("m_grid must be ascending with at least 4 widths"))
    manifest = await ExperimentRunner(_config(text, tmp_path)).run()
    assert manifest.exit_code == EXIT_ERROR
    stored = _load(tmp_path / "manifest.json")
    assert stored["status"] == "error"
    assert stored["error"]["error"]["type"] == "ValidationError"


def test_divergence_exit_code_and_partial_trace(tmp_path, config_file):
    """Test exit code 4 and the partial trace on divergence."""
    path = config_file(REGRESSION.replace("iters = 20", "iters = 200") + "eta_mode = fixed\neta = 1000.0\n")
    out = tmp_path / "out"
    assert main(["regression-gd", "--config", str(path), "--out", str(out)]) == EXIT_NUMERICAL
    stored = _load(out / "manifest.json")
    assert stored["error"]["error"]["type"] == "DivergenceError"
    assert (out / "trace_partial.csv").exists()


def test_config_errors_exit_code(tmp_path, config_file):
    """Test exit code 3 for unknown keys and a missing file."""
    path = config_file(REGRESSION + "width = 3\n")
    assert main(["regression-gd", "--config", str(path)]) == EXIT_CONFIG
    assert main(["regression-gd", "--config", str(tmp_path / "missing.conf")]) == EXIT_CONFIG


def test_cli_overrides(tmp_path, config_file):
    path = config_file(REGRESSION)
    out = tmp_path / "cli"
    assert main(["regression-gd", "--config", str(path), "--out", str(out), "--seed", "5"]) == EXIT_OK
    assert _load(out / "manifest.json")["config"]["seed"] == 5


def test_parser_rejects_unknown_mode():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--config", "run.conf"])
