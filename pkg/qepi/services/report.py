"""CSV and JSON-lines report writers; one row per CheckReport, flushed as written."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Literal, TextIO

import numpy as np

from qepi.models.dto import CheckReport, ReportRow

LOGGER = logging.getLogger(__name__)

COLUMNS: tuple[str, ...] = (
    "suite",
    "check",
    "seed",
    "trial",
    "margin",
    "tolerance",
    "passed",
    "diagnostics",
)

ReportFormat = Literal["csv", "jsonl"]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def to_row(suite: str, seed: int, trial: int, report: CheckReport) -> ReportRow:
    payload = {
        "inputs": report.inputs,
        "normative": report.normative,
        "values": report.diagnostics,
    }
    return ReportRow(
        suite=suite,
        check=report.name,
        seed=seed,
        trial=trial,
        margin=report.margin,
        tolerance=report.tolerance,
        passed=report.passed,
        diagnostics=json.dumps(payload, sort_keys=True, default=_jsonable),
        normative=report.normative,
    )


class ReportWriter:
    """Writes rows to ``path`` in the requested format, optionally mirrored as JSON lines."""

    def __init__(
        self,
        path: Path,
        fmt: ReportFormat = "csv",
        *,
        header: dict[str, Any] | None = None,
        mirror: bool = False,
    ) -> None:
        self.path = Path(path)
        self.fmt = fmt
        self.header = dict(header or {})
        self.mirror_path = self.path.with_suffix(".jsonl") if mirror and fmt == "csv" else None
        self.rows_written = 0
        self._handle: TextIO | None = None
        self._mirror: TextIO | None = None
        self._csv = None

    def __enter__(self) -> "ReportWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8", newline="")
        if self.fmt == "csv":
            for key, value in self.header.items():
                self._handle.write(f"# {key}={value}\n")
            self._csv = csv.writer(self._handle, lineterminator="\n")
            self._csv.writerow(COLUMNS)
        else:
            self._handle.write(json.dumps({"header": self.header}, sort_keys=True) + "\n")
        if self.mirror_path is not None:
            self._mirror = self.mirror_path.open("w", encoding="utf-8", newline="")
            self._mirror.write(json.dumps({"header": self.header}, sort_keys=True) + "\n")
        self._handle.flush()
        return self

    def write(self, row: ReportRow) -> None:
        if self._handle is None:
            raise RuntimeError("report writer is not open")
        if self._csv is not None:
            self._csv.writerow(
                [
                    row.suite,
                    row.check,
                    row.seed,
                    row.trial,
                    repr(row.margin),
                    repr(row.tolerance),
                    "true" if row.passed else "false",
                    row.diagnostics,
                ]
            )
        else:
            self._handle.write(row.model_dump_json() + "\n")
        self._handle.flush()
        if self._mirror is not None:
            self._mirror.write(row.model_dump_json() + "\n")
            self._mirror.flush()
        self.rows_written += 1

    def __exit__(self, *exc_info) -> None:
        for handle in (self._handle, self._mirror):
            if handle is not None:
                handle.close()
        LOGGER.info("report %s closed with %d row(s)", self.path, self.rows_written)


def read_rows(path: Path) -> list[dict[str, str]]:
    """Rows of a CSV report as dictionaries, header comments skipped."""

    with Path(path).open(encoding="utf-8", newline="") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    return list(csv.DictReader(lines))
