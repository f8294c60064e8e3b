"""Tests for loopint.suites.zeta_toy."""

from __future__ import annotations

from collections.abc import Callable

import pytest

from loopint.config import ExperimentConfig
from loopint.suites.zeta_toy import run


class TestZetaToy:
    def test_every_holonomy_agrees(self, small_config: ExperimentConfig) -> None:
        report = run(small_config)
        assert report.suite == "zeta-toy"
        assert len(report.checks) == 8
        assert report.ok

    def test_sweep_table(self, small_config: ExperimentConfig) -> None:
        rows = run(small_config).tables["sweep"]
        assert len(rows) == 8
        assert all(0 < row["alpha"] < 6.2832 for row in rows)
        for row in rows:
            assert row["determinant"] == pytest.approx(row["supertrace_square"])

    def test_point_count(self, make_config: Callable[..., ExperimentConfig]) -> None:
        config = make_config(zeta_toy={"points": 3})
        assert [c.passed for c in run(config).checks] == [True] * 3
