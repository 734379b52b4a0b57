# qepi/config.py
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from dotenv import dotenv_values
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from qepi.errors import ConfigError, ConfigIssue
from qepi.models.dto import RunConfig


class Settings(BaseSettings):
    # Reports
    output_dir: Path = Field(Path("reports"), alias="QEPI_OUTPUT_DIR")

    model_config = SettingsConfigDict(
        env_file=".env", case_sensitive=True, extra="ignore", populate_by_name=True
    )


settings = Settings()

# Phase-space tolerances
UNCERTAINTY_TOL = 1e-10
SYMPLECTIC_FLOOR = 1e-9
PAIRING_TOL = 1e-8
POSITIVE_DEFINITE_FLOOR = 1e-12
INEQUALITY_TOL = 1e-9

# Fock-space engine
TRUNCATION_BUDGET = 1e-8
EPS_CLAMP = 1e-12
SUPPORT_TOL = 1e-6
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
GAUSSIFY_UNCERTAINTY_TOL = 1e-6
DEFAULT_CUTOFF_ONE_MODE = 24
DEFAULT_CUTOFF_TWO_MODE = 16
RANDOM_SUPPORT_LEVELS = 6

# Diffusion
ODE_TOL = 1e-9
ODE_MIN_STEP = 1e-12
TRACE_DRIFT_TOL = 1e-8
PSD_REPAIR_TOL = 1e-8
CUTOFF_SIGMAS = 6.0
HERMITE_ORDER = 15
DISTANCE_TOL = 1e-4
MONOTONE_TOL = 1e-6
MAX_DIFFUSION_DIM = 144
COVARIANCE_RULE_TOL = 1e-5

# Fisher information
FISHER_REGULARIZATION = 1e-3
REGULARIZER_PHOTONS = 0.5
FD_STEP = 5e-3
FD_STEP_RANGE = (1e-4, 1e-1)
FISHER_TOL = 1e-6
FISHER_REL_TOL = 1e-3
RANK_FLOOR = 10 * EPS_CLAMP
RANK_BLOCK_LEVELS = 6
THERMAL_ORACLE_CUTOFF = 48
THERMAL_ORACLE_TOL = 1e-4

# Entropy power inequalities
EPI_TOL = 1e-6
DELTA_STEP_TOL = 1e-4
DEBRUIJN_ABS_TOL = 1e-5
DEBRUIJN_REL_TOL = 1e-3
DEBRUIJN_STEP = 5e-3
BLACHMAN_T_MAX = 2.0
BLACHMAN_RTOL = 1e-7

# Runner
RNG_ALGORITHM = "numpy.random.Philox(4x64-10)"


# Run configuration files

_LIST_FIELDS = ("lambda_grid", "t_grid")
_INT_FIELDS = ("seed", "trials", "cutoff", "workers")
_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _key_lines(path: Path) -> dict[str, int]:
    """1-based line number of the first assignment of every key in ``path``."""

    lines: dict[str, int] = {}
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        key = text.split("=", 1)[0].strip()
        if key.startswith("export "):
            key = key[len("export ") :].strip()
        lines.setdefault(key, number)
    return lines


def _parse_list(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("["):
        values = json.loads(text)
        if not isinstance(values, list):
            raise ValueError("expected a JSON list")
        return [float(v) for v in values]
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_tolerances(text: str) -> dict[str, float]:
    text = text.strip()
    if text.startswith("{"):
        values = json.loads(text)
        if not isinstance(values, dict):
            raise ValueError("expected a JSON object")
        return {str(k): float(v) for k, v in values.items()}
    tolerances: dict[str, float] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, sep, value = part.partition(":")
        if not sep or not name.strip():
            raise ValueError(f"expected name:value, got {part.strip()!r}")
        tolerances[name.strip()] = float(value)
    return tolerances


def _parse_value(field: str, text: str) -> Any:
    if field in _LIST_FIELDS:
        return _parse_list(text)
    if field == "tolerances":
        return _parse_tolerances(text)
    if field in _INT_FIELDS:
        return int(text.strip())
    if field == "jsonl_mirror":
        key = text.strip().lower()
        if key not in _BOOL_VALUES:
            raise ValueError(f"expected a boolean, got {text!r}")
        return _BOOL_VALUES[key]
    return text.strip()


def load_run_config(
    path: Path | None = None, overrides: Mapping[str, Any] | None = None
) -> RunConfig:
    """RunConfig from model defaults, then ``path`` (key=value), then ``overrides``.

    Every problem is collected into one ConfigError with field names and, for
    values read from the file, the line they appear on.
    """

    issues: list[ConfigIssue] = []
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([ConfigIssue("config", f"file not found: {path}")])
        lines = _key_lines(path)
        for field, text in dotenv_values(path, encoding="utf-8").items():
            line = lines.get(field)
            if field not in RunConfig.model_fields:
                issues.append(ConfigIssue(field, "unknown key", line))
                continue
            if text is None:
                issues.append(ConfigIssue(field, "missing value", line))
                continue
            try:
                values[field] = _parse_value(field, text)
            except (ValueError, TypeError) as exc:
                issues.append(ConfigIssue(field, f"malformed value {text!r}: {exc}", line))
    for field, value in (overrides or {}).items():
        if value is not None:
            values[field] = value
            lines.pop(field, None)
    if issues:
        raise ConfigError(issues)
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        for error in exc.errors():
            field = str(error["loc"][0]) if error["loc"] else "config"
            issues.append(ConfigIssue(field, error["msg"], lines.get(field)))
        raise ConfigError(issues) from exc
