"""Tests for the real/complex trace dictionary."""

from __future__ import annotations

import math

import pytest

from loopint.errors import UnsupportedBackendError
from loopint.phases import (
    complex_supertrace,
    describe,
    even_phase,
    flow_from_integral,
    index_from_integral,
    integral_from_flow,
    integral_from_index,
    odd_phase,
)


class TestEven:
    @pytest.mark.parametrize(("n", "phase"), [(2, 1j), (4, -1), (6, -1j), (8, 1)])
    def test_powers_of_i(self, n: int, phase: complex) -> None:
        assert even_phase(n) == pytest.approx(phase)

    def test_index_round_trip(self) -> None:
        assert index_from_integral(integral_from_index(-3, 2), 2) == pytest.approx(-3)

    def test_complex_supertrace_inverts_phase(self) -> None:
        # Str_C of the integral recovers the index
        assert complex_supertrace(integral_from_index(2, 2), 2) == pytest.approx(2)

    def test_odd_dimension_rejected(self) -> None:
        with pytest.raises(UnsupportedBackendError):
            even_phase(1)


class TestOdd:
    def test_circle(self) -> None:
        assert odd_phase(1, 2.0) == pytest.approx(1j * math.sqrt(math.pi))

    def test_flow_round_trip(self) -> None:
        value = integral_from_flow(2, 1, 0.5)
        assert value == pytest.approx(2j * math.sqrt(4 * math.pi))
        assert flow_from_integral(value, 1, 0.5) == pytest.approx(2)

    def test_even_dimension_rejected(self) -> None:
        with pytest.raises(UnsupportedBackendError):
            odd_phase(2, 1.0)


class TestDescribe:
    def test_even(self) -> None:
        assert describe(2) == {"kind": "even", "factor": "i^1", "value": str(1j)}

    def test_odd_without_time(self) -> None:
        assert "value" not in describe(1)
        assert describe(1, 1.0)["kind"] == "odd"
