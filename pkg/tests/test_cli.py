import json

import pytest
from click.testing import CliRunner

from src.interface.cli import cli
from src.interface.experiment_config import ExperimentConfig
from src.interface.experiment_runner import (
    EXIT_FAILURE, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_VALIDATION, ExperimentRunner,
)

SYMBOLS = {"theta1": "sqrt(2) - 1", "theta2": "sqrt(3) - 1"}
TRANSLATION = {"kind": "translation", "a": ["@theta1", "@theta2"]}


@pytest.fixture
def runner():
    return CliRunner()


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def _report(tmp_path, name):
    return json.loads((tmp_path / f"{name}.json").read_text(encoding="utf-8"))


def test_decide_affine_rational_translation(runner, tmp_path):
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "decide-affine", "--matrix", "1,0;0,1", "--a", "1/2,1/3"])
    assert result.exit_code == EXIT_OK
    report = _report(tmp_path, "decide_affine")
    assert report["command"] == "decide-affine"
    assert report["result"]["verdict"] == "NotMinimal"
    assert report["result"]["certificate"]["reason"] == "invariant character"
    assert report["result"]["certificate_verified"] is True


def test_decide_affine_skew_with_symbol(runner, tmp_path):
    args = ["--output-dir", str(tmp_path), "decide-affine", "--matrix", "1,0;1,1", "--a", "@theta,0",
            "--symbol", "theta=sqrt(2)"]
    assert runner.invoke(cli, args).exit_code == EXIT_OK
    report = _report(tmp_path, "decide_affine")
    assert report["result"]["verdict"] == "TotallyMinimal"
    assert report["independence_declarations"]["theta"] == "sqrt(2)"


def test_decide_affine_needs_both_options(runner, tmp_path):
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "decide-affine", "--matrix", "1,0;0,1"])
    assert result.exit_code == EXIT_VALIDATION


def test_decide_affine_rejects_undeclared_symbol(runner, tmp_path):
    args = ["--output-dir", str(tmp_path), "decide-affine", "--matrix", "1,0;0,1", "--a", "@theta,0"]
    assert runner.invoke(cli, args).exit_code == EXIT_VALIDATION


@pytest.mark.parametrize("data", [
    {"symbols": SYMBOLS, "system": TRANSLATION, "analysis": {"steps": 10**12}},
    {"symbols": SYMBOLS, "system": TRANSLATION, "unexpected": 1},
    {"system": TRANSLATION},
    {"symbols": SYMBOLS, "system": TRANSLATION, "analysis": {"resolution": 12}},
])
def test_invalid_configs_exit_with_validation_code(runner, tmp_path, data):
    path = _write(tmp_path, data)
    assert runner.invoke(cli, ["--output-dir", str(tmp_path), "coverage", path]).exit_code == EXIT_VALIDATION


def test_run_without_command_is_rejected(runner, tmp_path):
    path = _write(tmp_path, {"symbols": SYMBOLS, "system": TRANSLATION})
    assert runner.invoke(cli, ["--output-dir", str(tmp_path), "run", path]).exit_code == EXIT_VALIDATION


def test_malformed_json_is_rejected(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    assert runner.invoke(cli, ["--output-dir", str(tmp_path), "run", str(path)]).exit_code == EXIT_VALIDATION


def test_coverage_run_writes_report_and_curve(runner, tmp_path):
    data = {
        "symbols": SYMBOLS,
        "system": TRANSLATION,
        "analysis": {"command": "coverage", "steps": 5000, "resolution": 8, "seeds": [[0.1, 0.2]]},
        "output": {"name": "cov"},
    }
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "run", _write(tmp_path, data)])
    assert result.exit_code == EXIT_OK
    report = _report(tmp_path, "cov")
    assert report["result"]["runs"][0]["grid"]["fraction"] == 1.0
    assert report["config"]["analysis"]["resolution"] == 8
    assert report["independence_declarations"] == SYMBOLS
    curve = tmp_path / "curves" / "cov_coverage_0.csv"
    assert curve.read_text().splitlines()[0] == "step,fraction"


def test_classify_with_small_budget_is_inconclusive(runner, tmp_path):
    data = {
        "symbols": SYMBOLS,
        "system": TRANSLATION,
        "analysis": {"steps": 20, "resolution": 32, "seeds": [[0.3, 0.6]]},
    }
    result = runner.invoke(cli, ["--output-dir", str(tmp_path), "classify", _write(tmp_path, data)])
    assert result.exit_code == EXIT_INCONCLUSIVE
    assert _report(tmp_path, "classify")["result"]["orbits"][0]["classification"] == "Inconclusive"


def test_failing_tasks_give_failure_code(tmp_path):
    config = ExperimentConfig.model_validate({
        "symbols": SYMBOLS,
        "system": TRANSLATION,
        "analysis": {"command": "coverage", "steps": 10, "resolution": 8},
        "output": {"directory": str(tmp_path)},
    })
    runner = ExperimentRunner(config)
    runner.seeds = lambda: [object()]
    report, code = runner.execute()
    assert code == EXIT_FAILURE
    assert "error" in report["result"]["runs"][0]


def test_deterministic_runs_are_byte_identical(tmp_path):
    data = {
        "symbols": SYMBOLS,
        "system": TRANSLATION,
        "analysis": {"command": "classify", "steps": 2000, "resolution": 8, "seed_count": 3},
        "output": {"directory": str(tmp_path), "name": "det"},
        "deterministic": True,
    }
    outputs = []
    for _ in range(2):
        runner = ExperimentRunner(ExperimentConfig.model_validate(data))
        assert runner.workers == 1
        report, _ = runner.execute(created_at="2024-01-01T00:00:00+00:00")
        outputs.append((tmp_path / "det.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_build_describes_system(runner, tmp_path):
    path = _write(tmp_path, {"symbols": SYMBOLS, "system": TRANSLATION})
    assert runner.invoke(cli, ["--output-dir", str(tmp_path), "build", path]).exit_code == EXIT_OK
    assert "system" in _report(tmp_path, "build")["result"]
