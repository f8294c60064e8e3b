"""Tests for the even and odd Bismut-Chern characters on loops."""

from __future__ import annotations

import math

import numpy as np
import pytest

from loopint.bismut import (
    BChOdd,
    batch_supertrace,
    bch_even_q,
    bch_even_series,
    bch_odd_closed_form,
    bch_odd_q,
    beta_quadrature,
    beta_weights,
    equivariance_residual,
    integrate_bch_even,
    integrate_bch_odd,
)
from loopint.bundles import GaugeMap, TwistBundle
from loopint.geometry import DiscreteLoop, FlatTorus
from loopint.integrator import MCSettings
from loopint.phases import integral_from_flow, integral_from_index


def _wavy_loop(torus: FlatTorus, m: int = 16) -> DiscreteLoop:
    t = np.arange(m) / m
    points = np.stack(
        [0.4 + 0.2 * np.cos(2 * np.pi * t), 0.5 + 0.15 * np.sin(2 * np.pi * t)], axis=1
    )
    return DiscreteLoop.from_points(torus, points)


def _circle_loop(circle: FlatTorus, drift: float, m: int = 12) -> DiscreteLoop:
    t = np.arange(m) / m
    points = np.mod(0.3 + drift * t + 0.1 * np.sin(4 * np.pi * t), 1.0)[:, None]
    return DiscreteLoop.from_points(circle, points)


class TestEven:
    def test_trivial_bundle_has_no_supertrace(self, torus: FlatTorus) -> None:
        loop = _wavy_loop(torus)
        values = bch_even_q(loop, TwistBundle.trivial(torus), 1.0)
        assert abs(values[0]) == pytest.approx(0.0, abs=1e-12)

    def test_constant_loop(self, torus: FlatTorus) -> None:
        loop = DiscreteLoop.constant(torus, np.array([0.2, 0.3]), m=4)
        bundle = TwistBundle.flux_line(torus, 1)
        value = bch_even_q(loop, bundle, 0.5)[0]
        assert value == pytest.approx(-2j * math.sinh(math.pi / 2))

    def test_odd_parity_flips_sign(self, torus: FlatTorus) -> None:
        loop = _wavy_loop(torus)
        even = bch_even_q(loop, TwistBundle.flux_line(torus, 1), 0.5)[0]
        odd = bch_even_q(loop, TwistBundle.flux_line(torus, 1, parity=1), 0.5)[0]
        assert odd == pytest.approx(-even)

    def test_series_converges_to_transport(self, torus: FlatTorus) -> None:
        loop = _wavy_loop(torus)
        bundle = TwistBundle.flux_line(torus, 1)
        series = bch_even_series(loop, bundle, 0.5, n_max=10)
        exact = bch_even_q(loop, bundle, 0.5)
        assert abs(series.value[0] - exact[0]) <= series.tail + 1e-9
        assert series.partial_sums().shape == (1, 11)

    def test_batch_supertrace_of_identity(self) -> None:
        eye = np.eye(8)[None]
        assert batch_supertrace(eye, 2, (0, 1))[0] == pytest.approx(0.0)

    def test_monte_carlo_index(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 1)
        settings = MCSettings(n_samples=4000, grid=16, seed=5, chunk_size=1000)
        estimate = integrate_bch_even(bundle, 0.5, settings, substeps=4)
        expected = integral_from_index(-1, 2)
        assert abs(estimate.value - expected) <= 5 * estimate.stderr + 0.05


class TestOdd:
    def test_beta_quadrature(self) -> None:
        np.testing.assert_allclose(beta_quadrature(5), beta_weights(5), rtol=1e-12)
        assert beta_weights(1)[1] == pytest.approx(1 / 6)

    def test_constant_loop_is_trace_of_omega(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (2, -1))
        loop = DiscreteLoop.constant(circle, np.array([0.4]), m=6)
        assert bch_odd_q(loop, g, 1.0)[0] == pytest.approx(2j * math.pi)

    def test_zero_winding_matches_closed_form(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1,))
        loop = _circle_loop(circle, 0.0)
        assert loop.winding[0, 0] == 0
        np.testing.assert_allclose(bch_odd_q(loop, g, 1.0), bch_odd_closed_form(loop, g))

    def test_winding_loop_vanishes(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1,))
        loop = _circle_loop(circle, 1.0, m=24)
        assert loop.winding[0, 0] == 1
        assert abs(bch_odd_q(loop, g, 1.0)[0]) == pytest.approx(0.0, abs=1e-10)
        assert bch_odd_closed_form(loop, g)[0] == 0

    def test_independent_of_time(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1,))
        loop = _circle_loop(circle, 0.0)
        np.testing.assert_allclose(bch_odd_q(loop, g, 0.5), bch_odd_q(loop, g, 2.0))

    def test_evaluator_keeps_nodes(self, circle: FlatTorus) -> None:
        assert BChOdd(GaugeMap(circle, (1,)), s_nodes=16).s_nodes == 16

    def test_monte_carlo_flow(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1,))
        settings = MCSettings(n_samples=4000, grid=8, seed=9, chunk_size=1000)
        estimate = integrate_bch_odd(g, 1.0, settings, s_nodes=16)
        expected = integral_from_flow(1, 1, 1.0)
        assert abs(estimate.value - expected) <= 5 * estimate.stderr + 0.05


class TestEquivariance:
    def test_trivial_bundle(self, torus: FlatTorus) -> None:
        loop = _wavy_loop(torus)
        residual = equivariance_residual(TwistBundle.trivial(torus), loop, np.zeros(2))
        assert max(residual.defects) == pytest.approx(0.0, abs=1e-12)

    def test_first_order_defect(self, torus: FlatTorus) -> None:
        loop = _wavy_loop(torus)
        t = np.arange(loop.m) / loop.m
        v = 0.1 * np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=1)[None]
        residual = equivariance_residual(TwistBundle.flux_line(torus, 1), loop, v)
        assert abs(residual.rhs[0]) > 0.1
        assert residual.defects == sorted(residual.defects, reverse=True)
        assert residual.ratios[-1] == pytest.approx(2.0, rel=0.05)
