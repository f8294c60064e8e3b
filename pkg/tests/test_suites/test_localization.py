"""Tests for loopint.suites.localization."""

from __future__ import annotations

from collections.abc import Callable

import pytest

from loopint.config import ExperimentConfig
from loopint.suites.localization import run

Factory = Callable[..., ExperimentConfig]


class TestWithoutSampling:
    @pytest.fixture()
    def config(self, make_config: Factory) -> ExperimentConfig:
        return make_config(localization={"monte_carlo": False}, appendix={"enabled": False})

    def test_every_identity_holds(self, config: ExperimentConfig) -> None:
        report = run(config)
        assert report.ok, [c.name for c in report.failures()]

    def test_check_names(self, config: ExperimentConfig) -> None:
        names = {c.name for c in run(config).checks}
        assert "even.k=1[T=0.5].spectral_vs_rhs" in names
        assert "even.k=0.chern_closed" in names
        assert "odd.m=1.rhs_t_independence" in names
        assert "a_hat.flat_is_one" in names
        assert not any(name.endswith("mc_vs_spectral") for name in names)

    def test_estimates_per_time(self, config: ExperimentConfig) -> None:
        report = run(config)
        assert report.estimates["even.k=1.T=1.0"].rhs == pytest.approx(-1j)
        assert report.estimates["odd.m=1.T=0.5"].extra["spectral_flow"] == 1
        assert report.estimates["odd.m=0.T=0.5"].rhs == pytest.approx(0.0)

    def test_circle_backend_skips_even(self, make_config: Factory) -> None:
        config = make_config(localization={"monte_carlo": False}, appendix={"enabled": False})
        config = ExperimentConfig(**{**config.resolved_dict(), "backend": {"dim": 1}})
        names = [c.name for c in run(config).checks]
        assert names
        assert all(name.startswith("odd.") for name in names)


class TestAppendix:
    def test_fibre_and_relative_checks(self, make_config: Factory) -> None:
        config = make_config(localization={"fluxes": [], "windings": [], "monte_carlo": False})
        names = [c.name for c in run(config).checks]
        assert "relative_map" in names
        assert "fibre_integration" in names
        assert [n for n in names if n.startswith("transport_variation")] == [
            f"transport_variation.ratio[{j}]" for j in range(3)
        ]

    def test_variation_needs_flux(self, make_config: Factory) -> None:
        config = make_config(localization={"fluxes": [], "windings": [], "monte_carlo": False})
        config = ExperimentConfig(**{**config.resolved_dict(), "bundle": {"fluxes": [0]}})
        names = [c.name for c in run(config).checks]
        assert not any(n.startswith("transport_variation") for n in names)
