"""Data transfer objects shared by the verification services and the runner."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SUITES: tuple[str, ...] = (
    "gaussian-epi",
    "fock-epi",
    "fisher",
    "debruijn",
    "diffusion",
    "blachman",
    "conjecture-fuzz",
)

SuiteName = Literal[
    "gaussian-epi",
    "fock-epi",
    "fisher",
    "debruijn",
    "diffusion",
    "blachman",
    "conjecture-fuzz",
    "all",
]


class CheckReport(BaseModel):
    """Outcome of one inequality or identity verification."""

    model_config = ConfigDict(frozen=True)

    name: str
    inputs: dict[str, Any] = Field(default_factory=dict)
    margin: float
    tolerance: float
    passed: bool
    diagnostics: dict[str, float] = Field(default_factory=dict)
    normative: bool = True

    @model_validator(mode="after")
    def _passed_matches_margin(self) -> "CheckReport":
        expected = self.margin >= -self.tolerance
        if self.passed != expected:
            raise ValueError(
                f"passed={self.passed} inconsistent with margin={self.margin} "
                f"and tolerance={self.tolerance}"
            )
        return self

    @classmethod
    def evaluate(
        cls,
        name: str,
        margin: float,
        tolerance: float,
        *,
        inputs: dict[str, Any] | None = None,
        diagnostics: dict[str, float] | None = None,
        normative: bool = True,
    ) -> "CheckReport":
        """Build a report whose pass flag is derived from ``margin`` and ``tolerance``."""

        margin = float(margin)
        passed = not math.isnan(margin) and margin >= -tolerance
        return cls(
            name=name,
            inputs=dict(inputs or {}),
            margin=margin,
            tolerance=float(tolerance),
            passed=passed,
            diagnostics={key: float(value) for key, value in (diagnostics or {}).items()},
            normative=normative,
        )


class BlachmanTrace(BaseModel):
    """Diffusion clocks and entropy powers along one replay of the 50:50 proof."""

    model_config = ConfigDict(frozen=True)

    t_grid: list[float]
    F: list[float]
    G: list[float]
    H: list[float]
    E_X: list[float]
    E_Y: list[float]
    E_Z: list[float]
    delta: list[float]
    stam_slack: list[float | None] = Field(default_factory=list)

    @model_validator(mode="after")
    def _clocks_are_consistent(self) -> "BlachmanTrace":
        size = len(self.t_grid)
        for field_name in ("F", "G", "H", "E_X", "E_Y", "E_Z", "delta"):
            if len(getattr(self, field_name)) != size:
                raise ValueError(f"{field_name} must have {size} entries")
        for f, g, h in zip(self.F, self.G, self.H):
            if h != (f + g) / 2:
                raise ValueError("H must equal (F + G) / 2")
        for clock in (self.F, self.G):
            if any(later <= earlier for earlier, later in zip(clock, clock[1:])):
                raise ValueError("diffusion clocks must be strictly increasing")
        return self


class RunConfig(BaseModel):
    """Validated configuration of one `run` invocation."""

    model_config = ConfigDict(extra="forbid")

    suite: SuiteName = "all"
    seed: int = Field(0, ge=0, lt=2**64)
    trials: int = Field(10, ge=1)
    cutoff: int = Field(16, ge=8)
    lambda_grid: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    t_grid: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    tolerances: dict[str, float] = Field(default_factory=dict)
    output: Path | None = None
    format: Literal["csv", "jsonl"] = "csv"
    jsonl_mirror: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("lambda_grid")
    @classmethod
    def _lambdas_in_open_interval(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("lambda_grid must not be empty")
        for lam in value:
            if not 0.0 < lam < 1.0:
                raise ValueError(f"lambda {lam} outside the open interval (0, 1)")
        return value

    @field_validator("t_grid")
    @classmethod
    def _times_non_negative(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("t_grid must not be empty")
        for t in value:
            if t < 0:
                raise ValueError(f"time {t} is negative")
        return value

    @field_validator("tolerances")
    @classmethod
    def _tolerances_positive(cls, value: dict[str, float]) -> dict[str, float]:
        for key, tol in value.items():
            if tol <= 0:
                raise ValueError(f"tolerance for {key} must be positive")
        return value

    def tolerance(self, check: str, default: float) -> float:
        """Return the per-check override for ``check`` or ``default``."""

        return self.tolerances.get(check, default)

    def suites(self) -> tuple[str, ...]:
        """Expand ``all`` into the concrete suite list in report order."""

        return SUITES if self.suite == "all" else (self.suite,)


class ReportRow(BaseModel):
    """One line of a report file, in fixed column order."""

    model_config = ConfigDict(frozen=True)

    suite: str
    check: str
    seed: int
    trial: int
    margin: float
    tolerance: float
    passed: bool
    diagnostics: str
    normative: bool = Field(True, exclude=True)
