"""Tests for the constant-loop side of the localization identities."""

from __future__ import annotations

import math

import numpy as np
import pytest

from loopint.bundles import GaugeMap, TwistBundle
from loopint.clifford import CliffordElement
from loopint.errors import UnsupportedBackendError
from loopint.fields import FormField, TrigPolynomial
from loopint.geometry import FlatTorus
from loopint.localization import (
    a_hat_form,
    a_hat_series,
    closedness_defect,
    localization_check,
    localization_check_even,
    localization_check_odd,
    localized_rhs_even,
    localized_rhs_odd,
    log_x_over_sinh_coefficients,
)


class TestAHat:
    def test_series_coefficients(self) -> None:
        coeffs = log_x_over_sinh_coefficients(3)
        assert coeffs[0] == 0.0
        assert coeffs[1] == pytest.approx(-1 / 6)
        assert coeffs[2] == pytest.approx(1 / 180)

    def test_flat_torus_gives_one(self, torus: FlatTorus) -> None:
        assert a_hat_form(torus, 0.7) == CliffordElement.scalar(2, 1.0)

    def test_four_dimensional_block(self) -> None:
        omega = np.zeros(16)
        omega[0b0011] = 1.0
        omega[0b1100] = 1.0
        x = np.zeros((2, 2, 16))
        x[0, 1] = omega
        x[1, 0] = -omega
        result = a_hat_series(x)
        assert result[0] == pytest.approx(1.0)
        assert result[15] == pytest.approx(1 / 3)


class TestRightHandSides:
    @pytest.mark.parametrize("k", [-1, 0, 2])
    def test_even_is_phase_times_index(self, torus: FlatTorus, k: int) -> None:
        bundle = TwistBundle.flux_line(torus, k)
        assert localized_rhs_even(bundle, 0.5, grid=4) == pytest.approx(-1j * k)

    def test_even_needs_even_base(self, circle: FlatTorus) -> None:
        with pytest.raises(UnsupportedBackendError):
            localized_rhs_even(TwistBundle.trivial(circle), 1.0)

    @pytest.mark.parametrize("windings", [(1,), (2, -3)])
    def test_odd(self, circle: FlatTorus, windings: tuple[int, ...]) -> None:
        g = GaugeMap(circle, windings)
        expected = 1j * math.sqrt(2 * math.pi / 0.5) * sum(windings)
        assert localized_rhs_odd(g, 0.5, grid=4) == pytest.approx(expected)


class TestClosedness:
    def test_constant_form_is_closed(self, torus: FlatTorus) -> None:
        assert closedness_defect(FormField.constant(2, (1, 2)), torus) == pytest.approx(0.0)

    def test_chern_form_is_closed(self, torus: FlatTorus) -> None:
        assert closedness_defect(a_hat_form(torus, 1.0), torus) == pytest.approx(0.0)

    def test_wavy_one_form_is_not(self, torus: FlatTorus) -> None:
        field = FormField(2, 1, {0b01: TrigPolynomial.cosine((0, 1))})
        assert closedness_defect(field, torus) > 1.0


class TestChecks:
    def test_even_without_sampling(self, torus: FlatTorus) -> None:
        report = localization_check_even(TwistBundle.flux_line(torus, 1), 0.5, settings=None)
        assert report.spectral == pytest.approx(-1j)
        assert report.spectral_ok
        assert report.passed
        assert report.to_dict()["fluxes"] == [1]

    def test_odd_without_sampling(self, circle: FlatTorus) -> None:
        report = localization_check_odd(GaugeMap(circle, (2,)), 1.0, settings=None)
        assert report.extra["spectral_flow"] == 2
        assert report.extra["getzler"] == pytest.approx(2.0, abs=1e-6)
        assert report.passed

    def test_dispatch(self, torus: FlatTorus, circle: FlatTorus) -> None:
        assert localization_check(GaugeMap(circle, (1,)), 1.0, None).kind == "odd"
        assert localization_check(TwistBundle.trivial(torus), 1.0, None).kind == "even"
