"""Tests for loopint.suites.invariants."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from loopint.config import ExperimentConfig
from loopint.suites.invariants import (
    random_form,
    run,
    super_sign_violations,
    supertrace_parity_defect,
)

CHECKS = {
    "clifford.cyclic_supertrace",
    "clifford.supercommutator",
    "clifford.supertrace_parity",
    "clifford.associativity",
    "clifford.super_sign_composition",
    "blocks.isometry",
    "blocks.round_trip",
    "q.norm_bound",
    "q.rotation_invariance",
    "q.parity_vanishing",
}


class TestHelpers:
    def test_super_sign_is_a_cocycle(self, rng: np.random.Generator) -> None:
        assert super_sign_violations(rng, sizes=(2, 3)) == 0

    def test_supertrace_kills_wrong_parity(self, rng: np.random.Generator) -> None:
        assert supertrace_parity_defect(rng, 20) == 0.0

    def test_random_form_parity(self, rng: np.random.Generator) -> None:
        for _ in range(10):
            theta = random_form(rng, 2, points_only=True, degree_parity=1)
            assert theta.terms[0].degree % 2 == 1


class TestRun:
    def test_all_checks_reported(self, small_config: ExperimentConfig) -> None:
        report = run(small_config)
        assert {c.name for c in report.checks} == CHECKS

    def test_counting_checks_pass(self, small_config: ExperimentConfig) -> None:
        checks = {c.name: c for c in run(small_config).checks}
        assert checks["clifford.super_sign_composition"].value == 0
        assert checks["q.norm_bound"].value == 0

    def test_defects_at_rounding_level(self, small_config: ExperimentConfig) -> None:
        checks = {c.name: c for c in run(small_config).checks}
        for name in CHECKS - {"clifford.super_sign_composition", "q.norm_bound"}:
            assert checks[name].value < 1e-9, name

    def test_seeded(self, small_config: ExperimentConfig) -> None:
        first = [c.value for c in run(small_config).checks]
        second = [c.value for c in run(small_config).checks]
        assert first == second

    def test_seed_changes_the_draws(self, make_config: Callable[..., ExperimentConfig]) -> None:
        first = run(make_config(invariants={"seed": 1})).checks
        second = run(make_config(invariants={"seed": 2})).checks
        assert [c.value for c in first] != [c.value for c in second]
