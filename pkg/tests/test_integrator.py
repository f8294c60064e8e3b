"""Tests for the integral map estimators."""

from __future__ import annotations

import math

import numpy as np
import pytest

from loopint.bundles import TwistBundle
from loopint.errors import GridError, SpectralCutoffError, UnsupportedBackendError
from loopint.fields import FormField, TrigPolynomial
from loopint.geometry import FlatTorus, trace_heat
from loopint.integrator import (
    MCSettings,
    SpectralSettings,
    curvature_weight,
    integrate_mc,
    integrate_spectral,
    refinement_sweep,
    relative_map_check,
)
from loopint.loopforms import Density, insert_at, lift_form, wedge

AREA = FormField.constant(2, (1, 2))
SMALL = MCSettings(n_samples=2000, grid=8, seed=11, chunk_size=500)


class TestCurvatureWeight:
    def test_flat(self) -> None:
        assert curvature_weight(3.0, 0.0) == 1.0

    def test_constant_curvature(self) -> None:
        assert curvature_weight(8.0, 1.0) == pytest.approx(math.exp(-1.0))


class TestMonteCarlo:
    def test_area_insertion_is_partition_function(self, torus: FlatTorus) -> None:
        estimate = integrate_mc(insert_at(0.5, AREA), 1.0, torus, SMALL)
        assert estimate.value == pytest.approx(trace_heat(torus, 1.0), rel=1e-6)
        assert estimate.stderr == pytest.approx(0.0, abs=1e-9)

    def test_odd_summand_cancels_twist(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.trivial(torus, (0, 1))
        estimate = integrate_mc(insert_at(0.5, AREA), 1.0, torus, SMALL, bundle=bundle)
        assert abs(estimate.value) == pytest.approx(0.0, abs=1e-12)

    def test_relative_map_integrates_to_absolute(self, torus: FlatTorus) -> None:
        check = relative_map_check(insert_at(0.5, AREA), 1.0, torus, SMALL, grid=2)
        assert check.value == pytest.approx(check.expected, rel=1e-6)


class TestSpectral:
    def test_area_insertion(self, torus: FlatTorus) -> None:
        value = integrate_spectral(insert_at(0.25, AREA), 1.0, torus)
        assert value == pytest.approx(trace_heat(torus, 1.0), rel=1e-9)

    def test_mean_free_field_vanishes(self, torus: FlatTorus) -> None:
        field = FormField(2, 2, {3: TrigPolynomial.cosine((1, 0))})
        value = integrate_spectral(lift_form(Density.constant(), field), 1.0, torus)
        assert abs(value) == pytest.approx(0.0, abs=1e-12)

    def test_cutoff_below_reach(self, torus: FlatTorus) -> None:
        field = FormField(2, 2, {3: TrigPolynomial.cosine((3, 0))})
        with pytest.raises(SpectralCutoffError):
            integrate_spectral(insert_at(0.0, field), 1.0, torus, SpectralSettings(cutoff=2))

    def test_tail_tolerance(self, torus: FlatTorus) -> None:
        settings = SpectralSettings(cutoff=2, tail_tolerance=1e-14)
        with pytest.raises(SpectralCutoffError):
            integrate_spectral(insert_at(0.0, AREA), 0.01, torus, settings)

    def test_flux_twist_rejected(self, torus: FlatTorus) -> None:
        with pytest.raises(UnsupportedBackendError):
            integrate_spectral(
                insert_at(0.0, AREA), 1.0, torus, bundle=TwistBundle.flux_line(torus, 1)
            )

    def test_agrees_with_monte_carlo(self, torus: FlatTorus) -> None:
        dx = FormField(2, 1, {1: TrigPolynomial.cosine((0, 1)) + TrigPolynomial.constant(2)})
        dy = FormField.constant(2, (2,))
        theta = wedge(insert_at(0.0, dx), insert_at(0.5, dy))
        settings = MCSettings(n_samples=8000, grid=8, seed=3, chunk_size=2000)
        estimate = integrate_mc(theta, 0.5, torus, settings)
        exact = integrate_spectral(theta, 0.5, torus, SpectralSettings(cutoff=12))
        assert abs(estimate.value - exact) <= 5 * estimate.stderr + 1e-3


class TestRefinement:
    def test_needs_two_grids(self, torus: FlatTorus) -> None:
        with pytest.raises(GridError):
            refinement_sweep(lambda loops: np.ones(loops.batch), 1.0, torus, [8], SMALL)

    def test_grids_must_divide_finest(self, torus: FlatTorus) -> None:
        with pytest.raises(GridError):
            refinement_sweep(lambda loops: np.ones(loops.batch), 1.0, torus, [3, 8], SMALL)

    def test_constant_integrand(self, torus: FlatTorus) -> None:
        sweep = refinement_sweep(lambda loops: np.ones(loops.batch), 1.0, torus, [2, 4, 8], SMALL)
        assert sweep.grids == [2, 4, 8]
        assert sweep.differences == pytest.approx([0.0, 0.0])
        assert sweep.extrapolated == pytest.approx(sweep.value)
        assert math.isnan(sweep.slope)

    def test_coarse_grid_sees_fewer_nodes(self, torus: FlatTorus) -> None:
        sweep = refinement_sweep(
            lambda loops: np.full(loops.batch, float(loops.m)), 1.0, torus, [4, 8], SMALL
        )
        mass = sweep.estimates[0].value / 4
        assert sweep.estimates[1].value == pytest.approx(8 * mass)
