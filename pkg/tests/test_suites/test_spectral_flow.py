"""Tests for loopint.suites.spectral_flow."""

from __future__ import annotations

import pytest

from loopint.config import ExperimentConfig
from loopint.report import SuiteReport
from loopint.suites.spectral_flow import run


class TestSpectralFlow:
    @pytest.fixture()
    def report(self, small_config: ExperimentConfig) -> SuiteReport:
        return run(small_config)

    def test_tracking_and_heat_integral(self, report: SuiteReport) -> None:
        checks = {c.name: c for c in report.checks}
        for m in (-1, 0, 2):
            assert checks[f"m={m}.eigen_tracking"].passed
            assert checks[f"m={m}.eigen_tracking"].value == m
            assert checks[f"m={m}.getzler_integral"].passed

    def test_four_checks_per_winding(self, report: SuiteReport) -> None:
        assert len(report.checks) == 4 * 3
        assert {c.name.split(".")[1] for c in report.checks} == {
            "eigen_tracking",
            "getzler_integral",
            "closed_form",
            "mc_flow",
        }

    def test_eigenvalue_dump(self, report: SuiteReport) -> None:
        rows = report.tables["eigenvalues"]
        assert {row["winding"] for row in rows} == {-1, 0, 2}
        assert {row["s"] for row in rows} == {0.0, 0.25, 0.5, 0.75, 1.0}
        assert all(abs(row["eigenvalue"]) <= 20.0 for row in rows)

    def test_expected_integral_recorded(self, report: SuiteReport) -> None:
        entry = report.estimates["m=2"]
        assert entry["flow"] == 2
        assert entry["expected_integral"].imag == pytest.approx(2 * 2.5066282746, rel=1e-9)
