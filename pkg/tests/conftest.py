"""Shared test fixtures for loopint."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
import yaml

from loopint.config import ExperimentConfig
from loopint.geometry import FlatTorus

# Reduced budgets; the CLI defaults carry the full acceptance sizes.
SMALL_CONFIG: dict = {
    "monte_carlo": {"n_samples": 4000, "grid": 8, "seed": 7, "chunk_size": 1000},
    "spectral": {"cutoff": 12, "cutoff_check": 10, "landau_levels": 30, "s_nodes": 48},
    "T_values": [0.5, 1.0],
    "suites": {
        "invariants": {"random_cases": 50, "block_forms": 10, "q_forms": 8},
        "wiener_checks": {"n_samples": 4000, "galerkin_modes": 6},
        "index": {"fluxes": [-1, 0, 1], "n_samples": 4000, "series_order": 8},
        "spectral_flow": {"windings": [-1, 0, 2], "n_samples": 4000, "dump_points": 5},
        "localization": {"fluxes": [0, 1], "windings": [0, 1], "n_samples": 4000},
        "refine": {"flux": 1, "grids": [4, 8, 16]},
        "zeta_toy": {"points": 8},
        "appendix": {"n_samples": 4000, "loops": 4},
    },
}


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture()
def torus() -> FlatTorus:
    """The unit square torus with the trivial spin structure."""
    return FlatTorus.unit(2)


@pytest.fixture()
def circle() -> FlatTorus:
    return FlatTorus.circle()


@pytest.fixture()
def make_config(tmp_path: Path) -> Callable[..., ExperimentConfig]:
    """Factory for the small config with per-suite settings merged in."""

    def make(**suites: dict) -> ExperimentConfig:
        merged = dict(SMALL_CONFIG["suites"])
        for name, settings in suites.items():
            merged[name] = {**merged.get(name, {}), **settings}
        data = {**SMALL_CONFIG, "suites": merged, "output": {"dir": str(tmp_path / "reports")}}
        return ExperimentConfig(**data)

    return make


@pytest.fixture()
def small_config(make_config: Callable[..., ExperimentConfig]) -> ExperimentConfig:
    """An ExperimentConfig with small sample sizes writing into tmp_path."""
    return make_config()


@pytest.fixture()
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Factory writing the small config, with top-level sections replaced, to disk."""

    def write(**sections: object) -> Path:
        path = tmp_path / "experiment.yaml"
        data = {**SMALL_CONFIG, "output": {"dir": str(tmp_path / "reports")}, **sections}
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path

    return write


@pytest.fixture()
def config_file(write_config: Callable[..., Path]) -> Path:
    """A small experiment.yaml on disk."""
    return write_config()
