"""Suite reports: JSON documents with a stable key set and CSV tables.

Reports carry no timestamps so that a rerun with the same resolved config is
byte-identical; run times live in the ledger instead.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np


def package_version() -> str:
    try:
        return version("loopint")
    except PackageNotFoundError:
        return "0.0.0+local"


@dataclass
class CheckResult:
    """One pass/fail comparison inside a suite."""

    name: str
    passed: bool
    value: object = None
    expected: object = None
    tolerance: float | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class SuiteReport:
    """Everything a suite produced, ready to be serialised."""

    suite: str
    checks: list[CheckResult] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    version: str = field(default_factory=package_version)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "ok": self.ok,
            "checks": [c.to_dict() for c in self.checks],
            "estimates": self.estimates,
            "tables": sorted(self.tables),
            "config": self.config,
            "version": self.version,
        }


def to_jsonable(value: object) -> object:
    """Recursively convert numpy, complex and report objects to JSON types.

    Complex numbers become ``{"re": x, "im": y}``; non-finite floats become
    strings so the output stays valid JSON.
    """
    if hasattr(value, "to_dict") and callable(value.to_dict):
        return to_jsonable(value.to_dict())
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, bool) or value is None or isinstance(value, int | str):
        return value
    if isinstance(value, complex):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return str(value)


def write_json_report(report: SuiteReport, out_dir: Path | str) -> Path:
    """Write ``<out>/<suite>.json`` with sorted keys."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report.suite}.json"
    text = json.dumps(to_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(rows: Iterable[Mapping], path: Path | str, columns: Sequence[str]) -> Path:
    """Write rows as CSV; complex cells are written as ``re+imj``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return target


def _cell(v: object) -> object:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, complex):
        return repr(v)
    return v


def write_reports(report: SuiteReport, out_dir: Path | str) -> list[str]:
    """Write the JSON report plus one CSV per table; returns the file paths."""
    out = Path(out_dir)
    files = [str(write_json_report(report, out))]
    for name, rows in sorted(report.tables.items()):
        columns = list(rows[0]) if rows else []
        files.append(str(write_csv(rows, out / f"{report.suite}_{name}.csv", columns)))
    return files
