"""Tests for loopint.clifford."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from loopint.clifford import (
    CliffordElement,
    clifford_mul,
    complex_trace,
    compose,
    dequantize,
    exterior_mul,
    labels,
    permute_degrees,
    quantize,
    random_homogeneous,
    super_sign,
    supertrace,
    susy_permute,
)
from loopint.errors import DimensionMismatchError, NonHomogeneousError


def e(n: int, *indices: int) -> CliffordElement:
    return CliffordElement.monomial(n, indices)


class TestElement:
    def test_coefficient_count(self) -> None:
        assert CliffordElement.zero(3).coeffs.shape == (8,)

    def test_wrong_length_rejected(self) -> None:
        with pytest.raises(DimensionMismatchError):
            CliffordElement(2, [1.0, 2.0])

    def test_labels(self) -> None:
        assert labels(2) == ["1", "e1", "e2", "e1e2"]

    def test_monomials_orthonormal(self) -> None:
        basis = [CliffordElement(2, np.eye(4)[k]) for k in range(4)]
        gram = np.array([[a.inner(b) for b in basis] for a in basis])
        assert np.allclose(gram, np.eye(4))

    def test_parity(self) -> None:
        assert e(3, 1, 2).parity() == 0
        assert e(3, 1, 2, 3).parity() == 1
        with pytest.raises(NonHomogeneousError):
            (CliffordElement.scalar(2) + e(2, 1)).parity()

    def test_dimension_mismatch(self) -> None:
        with pytest.raises(DimensionMismatchError):
            e(2, 1) + e(3, 1)


class TestExterior:
    def test_alternating(self) -> None:
        assert exterior_mul(e(2, 1), e(2, 1)) == CliffordElement.zero(2)

    def test_antisymmetric(self) -> None:
        assert e(2, 1) ^ e(2, 2) == e(2, 1, 2)
        assert e(2, 2) ^ e(2, 1) == -e(2, 1, 2)

    def test_bilinear(self) -> None:
        lhs = (CliffordElement.scalar(2) + e(2, 1)) ^ e(2, 2)
        assert lhs == e(2, 2) + e(2, 1, 2)


class TestClifford:
    def test_generators_anticommute(self) -> None:
        assert (e(2, 1) * e(2, 2) + e(2, 2) * e(2, 1)) == CliffordElement.zero(2)

    def test_square_is_minus_one(self) -> None:
        assert e(2, 1) * e(2, 1) == CliffordElement.scalar(2, -1.0)

    def test_bivector_square(self) -> None:
        assert e(2, 1, 2) * e(2, 1, 2) == CliffordElement.scalar(2, -1.0)

    def test_associative(self, rng: np.random.Generator) -> None:
        for _ in range(20):
            a, b, c = (CliffordElement(4, rng.normal(size=16)) for _ in range(3))
            assert ((a * b) * c).allclose(a * (b * c), atol=1e-12)


class TestQuantization:
    def test_quantize_wedge_monomial(self) -> None:
        assert quantize(e(2, 1) ^ e(2, 2)) == clifford_mul(e(2, 1), e(2, 2))

    def test_dequantize(self) -> None:
        assert dequantize(e(2, 1) * e(2, 2)) == e(2, 1, 2)
        assert dequantize(e(2, 1) * e(2, 1)) == CliffordElement.scalar(2, -1.0)

    def test_round_trip(self, rng: np.random.Generator) -> None:
        a = CliffordElement(3, rng.normal(size=8))
        assert dequantize(quantize(a)) == a


class TestSupertrace:
    def test_unit_has_no_supertrace(self) -> None:
        assert supertrace(CliffordElement.scalar(2)) == 0.0

    def test_volume(self) -> None:
        assert supertrace(e(2, 1, 2)) == pytest.approx(2.0)

    def test_vector(self) -> None:
        assert supertrace(e(2, 1)) == 0.0

    def test_complex_trace_circle(self) -> None:
        assert complex_trace(CliffordElement.scalar(1)) == pytest.approx(1.0)
        assert complex_trace(e(1, 1)) == pytest.approx(1j)

    def test_complex_trace_surface(self) -> None:
        assert complex_trace(e(2, 1, 2)) == pytest.approx(-2j)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_cyclic(self, rng: np.random.Generator, n: int) -> None:
        for count in (2, 3, 4):
            factors = [random_homogeneous(rng, n) for _ in range(count)]
            parities = [f.parity() for f in factors]
            lhs = factors[-1]
            for f in reversed(factors[:-1]):
                lhs = lhs * f
            rhs = factors[0]
            for f in reversed(factors[1:]):
                rhs = rhs * f
            sign = (-1) ** (parities[0] * sum(parities[1:]))
            assert supertrace(lhs) == pytest.approx(sign * supertrace(rhs), abs=1e-12)

    def test_vanishes_on_supercommutators(self, rng: np.random.Generator) -> None:
        for _ in range(20):
            a, b = random_homogeneous(rng, 4), random_homogeneous(rng, 4)
            sign = (-1) ** (a.parity() * b.parity())
            assert abs(supertrace(a * b - sign * (b * a))) < 1e-12

    def test_parity_of_supertrace(self, rng: np.random.Generator) -> None:
        assert supertrace(random_homogeneous(rng, 4, parity=1)) == 0.0
        assert supertrace(random_homogeneous(rng, 3, parity=0)) == 0.0


class TestSuperSign:
    def test_swap_of_odd_degrees(self) -> None:
        assert super_sign((1, 0), (1, 1)) == -1

    def test_even_degrees(self) -> None:
        for sigma in itertools.permutations(range(4)):
            assert super_sign(sigma, (2, 0, 4, 2)) == 1

    def test_swap_with_even_factor(self) -> None:
        assert super_sign((1, 0), (1, 0)) == 1

    def test_not_a_permutation(self) -> None:
        with pytest.raises(ValueError):
            super_sign((0, 0), (1, 1))

    @pytest.mark.parametrize("size", [3, 4])
    def test_composition_law(self, size: int) -> None:
        for degrees in itertools.product((0, 1), repeat=size):
            for sigma in itertools.permutations(range(size)):
                for rho in itertools.permutations(range(size)):
                    lhs = super_sign(compose(sigma, rho), degrees)
                    rhs = super_sign(rho, permute_degrees(degrees, sigma)) * super_sign(
                        sigma, degrees
                    )
                    assert lhs == rhs

    def test_susy_identity(self) -> None:
        factors = [e(2, 1), e(2, 2)]
        sign, out = susy_permute((0, 1), factors)
        assert sign == 1
        assert out == factors

    def test_susy_swap_odd(self) -> None:
        sign, out = susy_permute((1, 0), [e(2, 1), e(2, 2)])
        assert sign == -1
        assert out == [e(2, 2), e(2, 1)]
