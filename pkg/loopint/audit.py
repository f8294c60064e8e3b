"""Append-only JSONL ledger of suite runs.

Each line records which suite ran, how it ended, the seed, and a digest of the
resolved config, so two runs can be matched without opening their reports.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

UTC = timezone.utc  # datetime.UTC alias (3.11+)

LEDGER_DIR = ".loopint"
LEDGER_FILE = "runs.jsonl"
DIGEST_LENGTH = 12


@dataclass
class RunEvent:
    """A single ledger entry."""

    suite: str
    status: str  # ok, fail or error
    detail: str = ""
    report_files: list[str] = field(default_factory=list)
    seed: int | None = None
    config_digest: str = ""
    seconds: float | None = None


def config_digest(resolved: dict) -> str:
    """Short sha256 of a resolved config, independent of key order."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:DIGEST_LENGTH]


def ledger_path(out_dir: Path | str) -> Path:
    return Path(out_dir).resolve() / LEDGER_DIR / LEDGER_FILE


def write_run_event(out_dir: Path | str, event: RunEvent) -> Path:
    """Append a run event to the ledger under the report directory.

    A UTC ISO-8601 timestamp is added automatically.

    Returns:
        Path to the ledger file.
    """
    path = ledger_path(out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)

    record = asdict(event)
    if record["seconds"] is not None:
        record["seconds"] = round(record["seconds"], 3)
    record["timestamp"] = datetime.now(UTC).isoformat()

    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def read_run_events(
    out_dir: Path | str, last_n: int = 20, suite: str | None = None
) -> list[dict]:
    """The most recent *last_n* ledger entries, newest first, optionally for one suite."""
    path = ledger_path(out_dir)
    if not path.exists():
        return []

    entries = [
        json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()
    ]
    if suite is not None:
        entries = [e for e in entries if e.get("suite") == suite]
    return entries[::-1][:last_n]
