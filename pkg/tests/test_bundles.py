"""Tests for loopint.bundles."""

from __future__ import annotations

import math

import numpy as np
import pytest

from loopint import bundles as bundles_module
from loopint.bundles import (
    FluxLine,
    GaugeMap,
    PotentialSpec,
    TwistBundle,
    chern_character_form,
    curvature_at,
    curvature_clifford,
    loop_holonomy,
    loop_holonomy_phases,
    maurer_cartan,
    odd_chern_character,
    path_ordered_exponential,
    path_ordered_series,
    segment_holonomy,
)
from loopint.errors import GridError, UnsupportedBackendError
from loopint.fields import TrigPolynomial
from loopint.geometry import DiscreteLoop, FlatTorus, rotate_loop


def _winding_loop(torus: FlatTorus) -> DiscreteLoop:
    points = np.array([[0.1, 0.2], [0.35, 0.3], [0.6, 0.25], [0.85, 0.4], [0.05, 0.1]])
    return DiscreteLoop.from_points(torus, points)


def _cosine_action(loop: DiscreteLoop, amplitude: float) -> float:
    """int_0^1 amplitude * cos(2 pi x_1(t)) dt along the polygon."""
    path = loop.as_path()
    xs = path.lifts[0, :, 0]
    total = 0.0
    for dt, a, b in zip(np.diff(path.times), xs[:-1], xs[1:], strict=True):
        if abs(b - a) < 1e-12:
            total += dt * math.cos(2 * math.pi * a)
        else:
            rise = math.sin(2 * math.pi * b) - math.sin(2 * math.pi * a)
            total += dt * rise / (2 * math.pi * (b - a))
    return amplitude * total


class TestBundle:
    def test_superdimension(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.trivial(torus, (0, 0, 1))
        assert bundle.rank == 3
        assert bundle.superdimension() == 1

    def test_tensor_adds_fluxes(self, torus: FlatTorus) -> None:
        a = TwistBundle(torus, (FluxLine(1, 0), FluxLine(2, 1)))
        b = TwistBundle.flux_line(torus, -1, parity=1)
        product = a.tensor(b)
        assert product.fluxes.tolist() == [0.0, 1.0]
        assert product.parities == (1, 0)

    def test_flux_needs_surface(self) -> None:
        with pytest.raises(UnsupportedBackendError):
            TwistBundle.flux_line(FlatTorus.unit(3), 1)

    def test_frame_must_be_unitary(self, torus: FlatTorus) -> None:
        with pytest.raises(ValueError):
            TwistBundle.trivial(torus, (0, 0)).with_frame(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestHolonomy:
    def test_zero_segment(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 3)
        hol = segment_holonomy(bundle, np.array([0.4, 0.2]), np.zeros(2))
        assert np.allclose(hol, np.eye(1))

    def test_triangle_area_phase(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 2)
        loop = DiscreteLoop.from_points(torus, np.array([[0.1, 0.1], [0.3, 0.1], [0.1, 0.3]]))
        phase = loop_holonomy_phases(bundle, loop)[0, 0]
        assert phase == pytest.approx(np.exp(-2j * np.pi * 2 * 0.02), abs=1e-12)

    def test_cell_boundary_is_trivial(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 3)
        lifts = np.array(
            [[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1], [0, 0.5]], dtype=float
        )
        loop = DiscreteLoop(torus, np.arange(8) / 8, lifts[None], np.zeros((1, 2), dtype=int))
        assert loop_holonomy_phases(bundle, loop)[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_basepoint_independent(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 2)
        loop = _winding_loop(torus)
        assert loop.winding.tolist() == [[1, 0]]
        reference = loop_holonomy_phases(bundle, loop)
        for steps in range(1, loop.m):
            rotated = loop_holonomy_phases(bundle, rotate_loop(loop, steps))
            assert np.allclose(rotated, reference, atol=1e-12)

    def test_lattice_translate_of_lift(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, -1)
        loop = _winding_loop(torus)
        for shift in ([1.0, 0.0], [0.0, 1.0], [2.0, -1.0]):
            moved = DiscreteLoop(torus, loop.times, loop.lifts + np.array(shift), loop.winding)
            assert np.allclose(
                loop_holonomy_phases(bundle, moved), loop_holonomy_phases(bundle, loop), atol=1e-12
            )

    def test_unitary_and_frame_covariant(self, torus: FlatTorus) -> None:
        theta = 0.3
        frame = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        plain = TwistBundle(torus, (FluxLine(1), FluxLine(-2)))
        framed = plain.with_frame(frame)
        loop = _winding_loop(torus)
        hol = loop_holonomy(framed, loop)[0]
        assert np.allclose(hol.conj().T @ hol, np.eye(2), atol=1e-12)
        assert np.trace(hol) == pytest.approx(np.trace(loop_holonomy(plain, loop)[0]), abs=1e-12)


class TestCurvature:
    def test_trivial(self, torus: FlatTorus) -> None:
        assert not np.any(curvature_at(TwistBundle.trivial(torus)))

    def test_conjugate_bundle(self, torus: FlatTorus) -> None:
        plus = curvature_at(TwistBundle.flux_line(torus, 2))
        minus = curvature_at(TwistBundle.flux_line(torus, -2))
        assert np.allclose(plus, -minus)

    @pytest.mark.parametrize("k", [1, -3])
    def test_quantized(self, k: int) -> None:
        torus = FlatTorus(np.array([[1.5, 0.2], [0.0, 0.8]]))
        curv = curvature_at(TwistBundle.flux_line(torus, k))
        total = np.trace(curv[0, 1]) * torus.volume
        assert abs(total) == pytest.approx(2 * math.pi * abs(k), abs=1e-12)


class TestChernCharacter:
    def test_trivial_graded(self, torus: FlatTorus) -> None:
        ch = chern_character_form(TwistBundle.trivial(torus, (0, 0, 1)), 1.0)
        assert np.allclose(ch.coeffs, [1, 0, 0, 0])

    @pytest.mark.parametrize("k", [1, 2, -1])
    def test_flux_line(self, torus: FlatTorus, k: int) -> None:
        T = 0.7
        ch = chern_character_form(TwistBundle.flux_line(torus, k), T)
        assert ch.coeffs[0] == pytest.approx(1.0)
        assert ch.coeffs[3] * torus.volume == pytest.approx(-2j * math.pi * k * T)

    def test_small_time_limit(self, torus: FlatTorus) -> None:
        bundle = TwistBundle(torus, (FluxLine(1, 0), FluxLine(3, 1), FluxLine(0, 1)))
        ch = chern_character_form(bundle, 1e-9)
        assert ch.coeffs[0] == pytest.approx(bundle.superdimension())


class TestGaugeMap:
    def test_needs_circle(self, torus: FlatTorus) -> None:
        with pytest.raises(UnsupportedBackendError):
            GaugeMap(torus, (1,))

    def test_maurer_cartan(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (3,))
        assert maurer_cartan(g, 0.2)[0, 0] == pytest.approx(6j * math.pi)
        assert not np.any(maurer_cartan(GaugeMap(circle, (0,)), 0.4))

    def test_finite_difference(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (2, -1))
        x = 0.3
        for h in (1e-3, 1e-4):
            fd = np.linalg.inv(g(x)) @ (g(x + h) - g(x)) / h
            assert np.abs(fd - maurer_cartan(g, x)).max() < 200 * h

    def test_unitary(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1, 2), frame=np.array([[0.6, -0.8], [0.8, 0.6]]))
        values = g(np.linspace(0.0, 1.0, 7))
        eye = np.conj(np.swapaxes(values, -1, -2)) @ values
        assert np.allclose(eye, np.eye(2), atol=1e-12)

    def test_odd_character(self, circle: FlatTorus) -> None:
        ch = odd_chern_character(GaugeMap(circle, (2,)), 1.0)
        assert ch.coeffs[1] == pytest.approx(4j * math.pi)
        assert not np.any(odd_chern_character(GaugeMap(circle, (0,)), 1.0).coeffs)

    def test_odd_character_has_no_higher_orders(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (3, -1), np.array([[0.6, 0.8], [-0.8, 0.6]]))
        short = odd_chern_character(g, 0.1).coeffs
        long = odd_chern_character(g, 25.0).coeffs
        assert np.array_equal(short, long)
        assert short[1] == pytest.approx(4j * math.pi)

    def test_winding_additivity(self, circle: FlatTorus) -> None:
        g1, g2 = GaugeMap(circle, (2,)), GaugeMap(circle, (-5,))
        total = odd_chern_character(g1.compose(g2), 1.0).coeffs[1]
        parts = odd_chern_character(g1, 1.0).coeffs[1] + odd_chern_character(g2, 1.0).coeffs[1]
        assert total == pytest.approx(parts, abs=1e-10)


class TestPathOrdered:
    def test_no_potential_is_holonomy(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 1)
        loop = _winding_loop(torus)
        u = path_ordered_exponential(loop, 1.0, bundle)
        expected = np.kron(np.eye(4), loop_holonomy(bundle, loop)[0])
        assert np.allclose(u[0], expected, atol=1e-12)

    def test_scalar_potential(self, torus: FlatTorus) -> None:
        potential = PotentialSpec(scalar=TrigPolynomial.constant(2, 0.7))
        u = path_ordered_exponential(_winding_loop(torus), 2.0, potential=potential)
        assert np.allclose(u[0], math.exp(-1.4) * np.eye(4), atol=1e-12)

    def test_series_matches_scalar_closed_form(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 1)
        potential = PotentialSpec(scalar=TrigPolynomial.cosine((1, 0), 0.5))
        loop = _winding_loop(torus)
        exact = math.exp(-_cosine_action(loop, 0.5)) * path_ordered_exponential(loop, 1.0, bundle)
        partial, tail = path_ordered_series(loop, 1.0, 6, bundle, potential)
        assert np.abs(partial[:, -1] - exact).max() <= tail + 1e-6
        assert tail < 1e-3
        ode = path_ordered_exponential(loop, 1.0, bundle, potential, substeps=64)
        assert np.abs(ode - exact).max() < 1e-4

    def test_series_does_not_share_the_transport_grid(
        self, torus: FlatTorus, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        bundle = TwistBundle.flux_line(torus, 1)
        potential = PotentialSpec(scalar=TrigPolynomial.cosine((1, 0), 0.5))
        loop = _winding_loop(torus)
        before, _ = path_ordered_series(loop, 1.0, 6, bundle, potential)
        original = bundles_module.transport_grid

        def skewed(*args: object, **kwargs: object) -> bundles_module.TransportGrid:
            grid = original(*args, **kwargs)
            grid.half_first = grid.half_first * np.exp(0.01j)
            grid.transports = grid.transports * np.exp(0.01j)
            return grid

        monkeypatch.setattr(bundles_module, "transport_grid", skewed)
        after, _ = path_ordered_series(loop, 1.0, 6, bundle, potential)
        assert np.array_equal(before, after)
        for splitting in ("midpoint", "strang"):
            u = path_ordered_exponential(loop, 1.0, bundle, potential, 64, splitting)
            assert np.abs(after[:, -1] - u).max() > 0.1

    def test_series_node_grid(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 2)
        potential = PotentialSpec(constant=0.5 * curvature_clifford(bundle))
        loop = _winding_loop(torus)
        coarse, _ = path_ordered_series(loop, 0.5, 8, bundle, potential, nodes=2)
        fine, _ = path_ordered_series(loop, 0.5, 8, bundle, potential, nodes=32)
        assert np.allclose(coarse, fine, atol=1e-10)
        with pytest.raises(GridError):
            path_ordered_series(loop, 0.5, 8, bundle, potential, nodes=3)


class TestSplitting:
    def test_commuting_potential(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 2)
        potential = PotentialSpec(constant=0.5 * curvature_clifford(bundle))
        loop = _winding_loop(torus)
        midpoint = path_ordered_exponential(loop, 1.0, bundle, potential, 8, "midpoint")
        strang = path_ordered_exponential(loop, 1.0, bundle, potential, 8, "strang")
        assert np.allclose(midpoint, strang, atol=1e-10)

    def test_both_converge(self, torus: FlatTorus) -> None:
        bundle = TwistBundle.flux_line(torus, 1)
        potential = PotentialSpec(scalar=TrigPolynomial.cosine((1, 0), 0.5))
        loop = _winding_loop(torus)
        exact = math.exp(-_cosine_action(loop, 0.5)) * path_ordered_exponential(loop, 1.0, bundle)
        for splitting in ("midpoint", "strang"):
            u = path_ordered_exponential(loop, 1.0, bundle, potential, 64, splitting)
            assert np.abs(u - exact).max() < 1e-4

    def test_unknown(self, torus: FlatTorus) -> None:
        with pytest.raises(ValueError, match="splitting"):
            path_ordered_exponential(_winding_loop(torus), 1.0, splitting="lie")
