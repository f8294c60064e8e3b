"""Tests for experiment configuration loading and validation."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import yaml

from loopint.config import (
    ExperimentConfig,
    FormExpr,
    apply_env_overrides,
    load_config,
    with_overrides,
)
from loopint.errors import ConfigError
from loopint.loopforms import PointMass


def _write(tmp_path: Path, data: object) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


FORMS_DOC: dict = {
    "fields": {
        "area": {"terms": [{"indices": [1, 2]}]},
        "dx": {"terms": [{"indices": [1]}]},
        "wave": {"terms": [{"indices": [2], "freq": [1, 0], "kind": "cos", "coeff": 0.5}]},
    },
    "profiles": {
        "early": {"point": 0.25},
        "ripple": {"density": [{"freq": 0, "coeff": 1.0}, {"freq": 1, "kind": "cos"}]},
    },
    "forms": {
        "area_at_zero": {"insert": {"field": "area", "at": 0.0}},
        "pair": {
            "wedge": [
                {"insert": {"field": "dx", "at": 0.25}},
                {"insert": {"field": "wave", "at": 0.5}},
            ]
        },
        "lifted": {"lift": {"field": "wave", "profile": "ripple"}},
        "mixed": {"sum": [{"ref": "pair"}, {"scale": {"factor": [0, 2], "of": {"ref": "pair"}}}]},
        "spread": {"average": {"k": 4, "of": {"ref": "area_at_zero"}}},
    },
}


class TestDefaults:
    def test_default_torus(self) -> None:
        config = ExperimentConfig()
        torus = config.torus()
        assert torus.dim == 2
        np.testing.assert_array_equal(torus.lattice, np.eye(2))

    def test_circle(self) -> None:
        assert ExperimentConfig().circle_torus().dim == 1

    def test_scalar_lattice_scales_identity(self) -> None:
        config = ExperimentConfig(backend={"dim": 2, "lattice": 2.0})
        np.testing.assert_array_equal(config.torus().lattice, 2 * np.eye(2))

    def test_diagonal_lattice(self) -> None:
        config = ExperimentConfig(backend={"dim": 2, "lattice": [1.0, 3.0]})
        assert config.torus().volume == pytest.approx(3.0)

    def test_bundle_frame(self) -> None:
        config = ExperimentConfig(bundle={"fluxes": [1, -1], "frame_angle": 0.3})
        bundle = config.twist_bundle()
        assert bundle.rank == 2
        assert bundle.frame is not None

    def test_bundle_override_fluxes(self) -> None:
        bundle = ExperimentConfig().twist_bundle([2, 0, 1])
        assert list(bundle.fluxes) == [2, 0, 1]

    def test_gauge_map(self) -> None:
        g = ExperimentConfig(gauge={"windings": [2, -1]}).gauge_map()
        assert g.windings == (2, -1)

    def test_settings(self) -> None:
        config = ExperimentConfig(monte_carlo={"n_samples": 10, "grid": 4, "seed": 3})
        settings = config.mc_settings(grid=8)
        assert (settings.n_samples, settings.grid, settings.seed) == (10, 8, 3)
        assert config.spectral_settings(cutoff=9).cutoff == 9

    def test_splitting_reaches_settings(self) -> None:
        assert ExperimentConfig().mc_settings().splitting == "strang"
        config = ExperimentConfig(monte_carlo={"splitting": "midpoint"})
        assert config.mc_settings().splitting == "midpoint"


class TestForms:
    def test_builds_every_form(self) -> None:
        forms = ExperimentConfig(**FORMS_DOC).build_forms()
        assert set(forms) == set(FORMS_DOC["forms"])
        assert forms["pair"].degree == 2
        assert forms["lifted"].degree == 1

    def test_insertion_time(self) -> None:
        forms = ExperimentConfig(**FORMS_DOC).build_forms()
        (factor,) = forms["area_at_zero"].terms[0].factors
        assert factor.profile == PointMass(0.0)

    def test_scale_and_sum(self) -> None:
        forms = ExperimentConfig(**FORMS_DOC).build_forms()
        assert [t.coeff for t in forms["mixed"].terms] == [1.0, 2j]

    def test_average_has_k_terms(self) -> None:
        forms = ExperimentConfig(**FORMS_DOC).build_forms()
        assert len(forms["spread"].terms) == 4

    def test_unknown_field(self) -> None:
        doc = {**FORMS_DOC, "forms": {"bad": {"insert": {"field": "nope", "at": 0.0}}}}
        with pytest.raises(ValueError, match="unknown field"):
            ExperimentConfig(**doc)

    def test_cyclic_reference(self) -> None:
        doc = {**FORMS_DOC, "forms": {"a": {"ref": "b"}, "b": {"ref": "a"}}}
        with pytest.raises(ValueError, match="cyclic"):
            ExperimentConfig(**doc)

    def test_point_profile_cannot_be_lifted(self) -> None:
        doc = {**FORMS_DOC, "forms": {"bad": {"lift": {"field": "dx", "profile": "early"}}}}
        with pytest.raises(ValueError, match="point mass"):
            ExperimentConfig(**doc)

    def test_mixed_degrees(self) -> None:
        doc = {
            **FORMS_DOC,
            "fields": {"bad": {"terms": [{"indices": [1]}, {"indices": [1, 2]}]}},
            "forms": {"f": {"insert": {"field": "bad", "at": 0.1}}},
        }
        with pytest.raises(ValueError, match="mix degrees"):
            ExperimentConfig(**doc)

    def test_expression_needs_one_operation(self) -> None:
        with pytest.raises(ValueError):
            FormExpr(ref="a", unit=1.0)

    def test_compare_refers_to_forms(self) -> None:
        with pytest.raises(ValueError, match="unknown form"):
            ExperimentConfig(suites={"compare": {"forms": ["missing"]}})


class TestValidation:
    def test_nonpositive_time(self) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig(T_values=[1.0, 0.0])

    def test_duplicate_times_removed(self) -> None:
        assert ExperimentConfig(T_values=[1, 0.5, 1.0]).T_values == [1.0, 0.5]

    def test_unknown_key_rejected(self) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig(monte_carlo={"samples": 10})

    def test_nonpositive_grid(self) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig(monte_carlo={"grid": 0})

    def test_unknown_splitting(self) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig(monte_carlo={"splitting": "lie"})

    def test_spin_structure_length(self) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig(backend={"dim": 2, "spin_structure": [1]})


class TestLoading:
    def test_load(self, config_file: Path) -> None:
        config = load_config(config_file)
        assert config.monte_carlo.n_samples == 4000

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.yaml")

    def test_empty_file(self, tmp_path: Path) -> None:
        path = tmp_path / "experiment.yaml"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ConfigError, match="empty"):
            load_config(path)

    def test_not_a_mapping(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="mapping"):
            load_config(_write(tmp_path, [1, 2, 3]))

    def test_invalid_yaml(self, tmp_path: Path) -> None:
        path = tmp_path / "experiment.yaml"
        path.write_text("forms: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid YAML"):
            load_config(path)

    def test_malformed_form(self, tmp_path: Path) -> None:
        doc = {**FORMS_DOC, "forms": {"bad": {"wedge": []}}}
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, doc))

    def test_config_error_exit_code(self) -> None:
        assert ConfigError.exit_code == 2


class TestOverrides:
    def test_environment(self) -> None:
        env = {"LOOPINT_SEED": "99", "LOOPINT_WORKERS": "3", "LOOPINT_OUT": "elsewhere"}
        config = apply_env_overrides(ExperimentConfig(), env)
        assert config.monte_carlo.seed == 99
        assert config.monte_carlo.workers == 3
        assert config.output.dir == "elsewhere"

    def test_environment_sample_count(self) -> None:
        config = apply_env_overrides(ExperimentConfig(), {"LOOPINT_N_SAMPLES": "123"})
        assert config.monte_carlo.n_samples == 123

    def test_invalid_environment(self) -> None:
        with pytest.raises(ConfigError):
            apply_env_overrides(ExperimentConfig(), {"LOOPINT_SEED": "seven"})

    def test_flags_win_over_environment(self) -> None:
        config = apply_env_overrides(ExperimentConfig(), {"LOOPINT_SEED": "99"})
        config = with_overrides(config, seed=5, out=Path("flagged"))
        assert config.monte_carlo.seed == 5
        assert config.output.dir == "flagged"

    def test_no_overrides_is_identity(self) -> None:
        config = ExperimentConfig()
        assert with_overrides(config) is config
        assert apply_env_overrides(config, {}) is config

    def test_resolved_dict_is_plain(self) -> None:
        resolved = ExperimentConfig(**FORMS_DOC).resolved_dict()
        assert resolved["monte_carlo"]["seed"] == 7
        yaml.safe_dump(resolved)
