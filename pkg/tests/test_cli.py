"""Tests for loopint.cli: Typer commands via CliRunner."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

from typer.testing import CliRunner

from loopint.cli import app

runner = CliRunner()


class TestCliSuites:
    def test_zeta_toy(self, config_file: Path, tmp_path: Path) -> None:
        result = runner.invoke(app, ["zeta-toy", "--config", str(config_file)])
        assert result.exit_code == 0, result.output
        assert "zeta-toy" in result.output
        assert (tmp_path / "reports" / "zeta-toy.json").exists()
        assert (tmp_path / "reports" / "zeta-toy_sweep.csv").exists()

    def test_out_flag_wins(self, config_file: Path, tmp_path: Path) -> None:
        out = tmp_path / "elsewhere"
        result = runner.invoke(app, ["zeta-toy", "-c", str(config_file), "-o", str(out)])
        assert result.exit_code == 0
        assert (out / "zeta-toy.json").exists()

    def test_tolerance_failure_exit_code(self, write_config: Callable[..., Path]) -> None:
        path = write_config(tolerances={"zeta": -1.0})
        result = runner.invoke(app, ["zeta-toy", "--config", str(path)])
        assert result.exit_code == 3
        assert "FAIL" in result.output

    def test_missing_config(self, tmp_path: Path) -> None:
        result = runner.invoke(app, ["zeta-toy", "--config", str(tmp_path / "absent.yaml")])
        assert result.exit_code == 2
        assert "config error" in result.output

    def test_invalid_config(self, write_config: Callable[..., Path]) -> None:
        path = write_config(monte_carlo={"grid": 0})
        result = runner.invoke(app, ["index", "--config", str(path)])
        assert result.exit_code == 2

    def test_no_arguments_shows_help(self) -> None:
        result = runner.invoke(app, [])
        assert "spectral-flow" in result.output


class TestCliHistory:
    def test_empty(self, tmp_path: Path) -> None:
        result = runner.invoke(app, ["history", "--out", str(tmp_path)])
        assert result.exit_code == 0
        assert "No runs recorded" in result.output

    def test_after_run(self, config_file: Path, tmp_path: Path) -> None:
        runner.invoke(app, ["zeta-toy", "--config", str(config_file)])
        result = runner.invoke(app, ["history", "--out", str(tmp_path / "reports")])
        assert result.exit_code == 0
        assert "zeta-toy" in result.output

    def test_suite_filter(self, config_file: Path, tmp_path: Path) -> None:
        runner.invoke(app, ["zeta-toy", "--config", str(config_file)])
        out = str(tmp_path / "reports")
        assert "zeta-toy" in runner.invoke(app, ["history", "-o", out, "-s", "zeta-toy"]).output
        filtered = runner.invoke(app, ["history", "-o", out, "--suite", "index"])
        assert "No runs recorded" in filtered.output


class TestCliShowConfig:
    def test_summary(self, config_file: Path) -> None:
        result = runner.invoke(app, ["show-config", "--config", str(config_file)])
        assert result.exit_code == 0
        assert "Fourier cutoff" in result.output
        assert "4000" in result.output

    def test_environment_then_flag(self, config_file: Path) -> None:
        env = {"LOOPINT_SEED": "99"}
        from_env = runner.invoke(app, ["show-config", "-c", str(config_file), "--full"], env=env)
        assert "seed: 99" in from_env.output
        flagged = runner.invoke(
            app, ["show-config", "-c", str(config_file), "--full", "--seed", "5"], env=env
        )
        assert "seed: 5" in flagged.output

    def test_full_dump(self, config_file: Path) -> None:
        result = runner.invoke(app, ["show-config", "--config", str(config_file), "--full"])
        assert result.exit_code == 0
        assert "monte_carlo:" in result.output

