"""Tests for loopint.audit."""

from pathlib import Path

from loopint.audit import RunEvent, config_digest, read_run_events, write_run_event


class TestLedger:
    def test_creates_ledger_file(self, tmp_path: Path) -> None:
        path = write_run_event(tmp_path, RunEvent(suite="index", status="ok", detail="fine"))
        assert path.exists()
        assert path.parent.name == ".loopint"

    def test_entry_has_timestamp(self, tmp_path: Path) -> None:
        write_run_event(tmp_path, RunEvent(suite="index", status="ok"))
        entries = read_run_events(tmp_path, last_n=1)
        assert len(entries) == 1
        assert "timestamp" in entries[0]

    def test_read_empty(self, tmp_path: Path) -> None:
        assert read_run_events(tmp_path) == []

    def test_ordering(self, tmp_path: Path) -> None:
        for i in range(5):
            write_run_event(tmp_path, RunEvent(suite=f"suite{i}", status="ok"))
        entries = read_run_events(tmp_path, last_n=3)
        assert len(entries) == 3
        # Most recent first
        assert entries[0]["suite"] == "suite4"
        assert entries[2]["suite"] == "suite2"

    def test_seed_and_files_recorded(self, tmp_path: Path) -> None:
        write_run_event(
            tmp_path,
            RunEvent(suite="compare", status="fail", report_files=["compare.json"], seed=7),
        )
        (entry,) = read_run_events(tmp_path, last_n=1)
        assert entry["report_files"] == ["compare.json"]
        assert entry["seed"] == 7
        assert entry["status"] == "fail"

    def test_filter_by_suite(self, tmp_path: Path) -> None:
        for suite in ("index", "refine", "index"):
            write_run_event(tmp_path, RunEvent(suite=suite, status="ok"))
        entries = read_run_events(tmp_path, suite="index")
        assert [e["suite"] for e in entries] == ["index", "index"]

    def test_duration_rounded(self, tmp_path: Path) -> None:
        write_run_event(tmp_path, RunEvent(suite="index", status="ok", seconds=1.23456))
        (entry,) = read_run_events(tmp_path)
        assert entry["seconds"] == 1.235


class TestConfigDigest:
    def test_key_order_irrelevant(self) -> None:
        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})

    def test_values_matter(self) -> None:
        assert config_digest({"seed": 1}) != config_digest({"seed": 2})

    def test_length(self) -> None:
        assert len(config_digest({})) == 12
