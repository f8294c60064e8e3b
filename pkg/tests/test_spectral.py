"""Tests for truncated Dirac spectra and their heat traces."""

from __future__ import annotations

import math

import numpy as np
import pytest

from loopint.bundles import GaugeMap, TwistBundle
from loopint.errors import GridError, SpectralCutoffError, UnsupportedBackendError
from loopint.fields import FormField
from loopint.geometry import FlatTorus, trace_heat
from loopint.spectral import (
    dirac_spectrum,
    eigen_dump_rows,
    fourier_tail,
    getzler_flow_integral,
    heat_supertrace,
    heat_trace,
    landau_levels,
    magnetic_ground_multiplicity,
    op_product_supertrace,
    spectral_flow,
    weyl_count,
    zeta_det_toy,
)


class TestUntwisted:
    def test_supertrace_vanishes(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, cutoff=12)
        assert heat_supertrace(spec, 1.0) == pytest.approx(0.0)

    def test_kernel_of_trivial_spin_structure(self, torus: FlatTorus) -> None:
        assert dirac_spectrum(torus, cutoff=4).kernel_dimension() == 2

    def test_nontrivial_spin_structure_has_no_kernel(self) -> None:
        spec = dirac_spectrum(FlatTorus.unit(2, (1, 0)), cutoff=4)
        assert spec.kernel_dimension() == 0

    def test_heat_trace_doubles_scalar_trace(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, cutoff=12)
        assert heat_trace(spec, 0.5) == pytest.approx(2 * trace_heat(torus, 0.5), rel=1e-9)

    def test_tail_checked(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, cutoff=2)
        with pytest.raises(SpectralCutoffError):
            heat_supertrace(spec, 0.01)

    def test_odd_dimension_rejected(self, circle: FlatTorus) -> None:
        with pytest.raises(UnsupportedBackendError):
            heat_supertrace(dirac_spectrum(circle, cutoff=8), 1.0)

    def test_tail_decreases_with_cutoff(self, torus: FlatTorus) -> None:
        assert fourier_tail(torus, 0.5, 8) < fourier_tail(torus, 0.5, 4)

    def test_weyl_count(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, cutoff=8)
        count, leading = weyl_count(spec, 20.0)
        assert count == pytest.approx(leading, rel=0.25)


class TestLandau:
    @pytest.mark.parametrize("k", [-2, -1, 1, 3])
    def test_index_is_minus_flux(self, torus: FlatTorus, k: int) -> None:
        spec = dirac_spectrum(torus, TwistBundle.flux_line(torus, k), cutoff=30)
        assert heat_supertrace(spec, 1.0) == pytest.approx(-k)

    def test_dictionary_phase(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, TwistBundle.flux_line(torus, 1), cutoff=30)
        assert heat_supertrace(spec, 1.0, dictionary=True) == pytest.approx(-1j)

    def test_odd_parity_flips_index(self, torus: FlatTorus) -> None:
        spec = dirac_spectrum(torus, TwistBundle.flux_line(torus, 1, parity=1), cutoff=30)
        assert heat_supertrace(spec, 1.0) == pytest.approx(1.0)

    def test_levels(self, torus: FlatTorus) -> None:
        vals, mult, chir = landau_levels(torus, 2, 3)
        b = 4 * math.pi
        np.testing.assert_allclose(vals[1::2], np.sqrt(2 * b * np.arange(1, 4)))
        assert mult.tolist() == [2] * 7
        assert chir[0] == -1

    def test_zero_flux_rejected(self, torus: FlatTorus) -> None:
        with pytest.raises(ValueError):
            landau_levels(torus, 0, 3)

    @pytest.mark.parametrize("k", [1, 2])
    def test_peierls_ground_multiplicity(self, torus: FlatTorus, k: int) -> None:
        assert magnetic_ground_multiplicity(torus, k, grid=16) == k


class TestOperatorProducts:
    def test_identity_has_no_supertrace(self, torus: FlatTorus) -> None:
        assert op_product_supertrace(torus, [], 1.0, cutoff=10) == pytest.approx(0.0)

    def test_volume_insertion(self, torus: FlatTorus) -> None:
        area = FormField.constant(2, (1, 2))
        value = op_product_supertrace(torus, [(0.5, area)], 1.0, cutoff=10)
        assert value == pytest.approx(2 * trace_heat(torus, 1.0), rel=1e-9)

    def test_unordered_times(self, torus: FlatTorus) -> None:
        dx = FormField.constant(2, (1,))
        with pytest.raises(GridError):
            op_product_supertrace(torus, [(0.6, dx), (0.2, dx)], 1.0, cutoff=10)


class TestCircleFamily:
    @pytest.mark.parametrize("windings", [(1,), (-1,), (2,), (1, -3)])
    def test_flow_is_total_winding(self, circle: FlatTorus, windings: tuple[int, ...]) -> None:
        g = GaugeMap(circle, windings)
        assert spectral_flow(g, cutoff=12) == sum(windings)

    def test_flow_off_circle(self, torus: FlatTorus) -> None:
        with pytest.raises(UnsupportedBackendError):
            GaugeMap(torus, (1,))

    @pytest.mark.parametrize("windings", [(1,), (2, -1)])
    def test_heat_integral_matches_flow(
        self, circle: FlatTorus, windings: tuple[int, ...]
    ) -> None:
        g = GaugeMap(circle, windings)
        assert getzler_flow_integral(g, 1.0) == pytest.approx(sum(windings), abs=1e-6)

    def test_eigen_dump_window(self, circle: FlatTorus) -> None:
        g = GaugeMap(circle, (1,))
        spectra = [(s, dirac_spectrum(circle, g, cutoff=6, s=s)) for s in (0.0, 0.5)]
        rows = eigen_dump_rows(spectra, window=10.0)
        assert rows
        assert all(abs(r["eigenvalue"]) <= 10.0 for r in rows)
        first = [r["eigenvalue"] for r in rows if r["s"] == 0.0]
        assert first == sorted(first)


class TestZetaToy:
    @pytest.mark.parametrize("alpha", [0.3, math.pi, 5.9])
    def test_both_sides_agree(self, alpha: float) -> None:
        det, lifted = zeta_det_toy(alpha)
        assert det == pytest.approx(lifted)
        assert det == pytest.approx(4 * math.sin(alpha / 2) ** 2)

    def test_trivial_holonomy_rejected(self) -> None:
        with pytest.raises(ValueError):
            zeta_det_toy(0.0)
