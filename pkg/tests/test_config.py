from __future__ import annotations

import pytest

from qepi.config import load_run_config
from qepi.errors import ConfigError


def _write(tmp_path, text: str):
    path = tmp_path / "run.env"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_without_file():
    config = load_run_config()

    assert config.suite == "all"
    assert config.lambda_grid == [0.25, 0.5, 0.75]
    assert config.workers == 1


def test_file_values_are_parsed(tmp_path):
    path = _write(
        tmp_path,
        "# comment\nsuite=fisher\nseed=11\nlambda_grid=[0.3, 0.6]\nt_grid=0.5,1\n"
        "tolerances=qepi_power:1e-4, stam:2e-6\njsonl_mirror=yes\n",
    )

    config = load_run_config(path)

    assert config.suite == "fisher"
    assert config.seed == 11
    assert config.lambda_grid == [0.3, 0.6]
    assert config.t_grid == [0.5, 1.0]
    assert config.tolerances == {"qepi_power": 1e-4, "stam": 2e-6}
    assert config.jsonl_mirror
    assert config.tolerance("stam", 1.0) == 2e-6
    assert config.tolerance("de_bruijn", 1.0) == 1.0


def test_tolerances_accept_json(tmp_path):
    path = _write(tmp_path, 'tolerances={"blachman": 0.001}\n')

    assert load_run_config(path).tolerances == {"blachman": 0.001}


def test_command_line_overrides_the_file(tmp_path):
    path = _write(tmp_path, "seed=11\ntrials=4\n")

    config = load_run_config(path, {"seed": 3, "trials": None})

    assert config.seed == 3
    assert config.trials == 4


def test_every_problem_is_reported_with_its_line(tmp_path):
    path = _write(tmp_path, "seed=1\ncolour=blue\ntrials=many\n")

    with pytest.raises(ConfigError) as excinfo:
        load_run_config(path)

    issues = {issue.field: issue.line for issue in excinfo.value.issues}
    assert issues == {"colour": 2, "trials": 3}


def test_validation_errors_keep_line_numbers(tmp_path):
    path = _write(tmp_path, "seed=1\n\ncutoff=4\nlambda_grid=0.5,1.5\n")

    with pytest.raises(ConfigError) as excinfo:
        load_run_config(path)

    issues = {issue.field: issue.line for issue in excinfo.value.issues}
    assert issues == {"cutoff": 3, "lambda_grid": 4}


def test_override_errors_have_no_line(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(None, {"trials": 0})

    (issue,) = excinfo.value.issues
    assert issue.field == "trials"
    assert issue.line is None


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.env")
