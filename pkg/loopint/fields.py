"""Trigonometric-polynomial coefficient fields on the unit cell.

A ``TrigPolynomial`` is a finite Fourier sum f(u) = sum_j c_j exp(2 pi i j.u)
in cell coordinates u in R^d / Z^d. A ``FormField`` is a homogeneous
differential form on a flat torus whose components (with respect to the
Euclidean coframe dx^I) are trigonometric polynomials in u.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from loopint.clifford import grades, mask_of, sign_tables
from loopint.errors import DimensionMismatchError

# ---------------------------------------------------------------------------
# Trigonometric polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """Finite Fourier sum in d cell coordinates."""

    freqs: np.ndarray  # (K, d) integer frequencies
    coeffs: np.ndarray  # (K,) complex coefficients

    def __post_init__(self) -> None:
        freqs = np.asarray(self.freqs, dtype=np.int64)
        if freqs.ndim == 1:
            freqs = freqs.reshape(len(self.coeffs), -1)
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        freqs.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.freqs.shape[1]

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_terms(cls, dim: int, terms: Mapping[tuple[int, ...], complex]) -> TrigPolynomial:
        """Build from {frequency tuple: coefficient}; repeated keys are summed upstream."""
        items = [(tuple(k), complex(v)) for k, v in terms.items() if v != 0]
        for k, _ in items:
            if len(k) != dim:
                raise DimensionMismatchError(f"frequency {k} does not have {dim} entries")
        if not items:
            return cls.zero(dim)
        freqs = np.array([k for k, _ in items], dtype=np.int64)
        coeffs = np.array([v for _, v in items], dtype=np.complex128)
        return cls(freqs, coeffs)

    @classmethod
    def zero(cls, dim: int) -> TrigPolynomial:
        return cls(np.zeros((0, dim), dtype=np.int64), np.zeros(0, dtype=np.complex128))

    @classmethod
    def constant(cls, dim: int, value: complex = 1.0) -> TrigPolynomial:
        return cls.from_terms(dim, {(0,) * dim: value})

    @classmethod
    def cosine(cls, freq: Iterable[int], amplitude: float = 1.0) -> TrigPolynomial:
        """amplitude * cos(2 pi freq.u)."""
        f = tuple(int(v) for v in freq)
        neg = tuple(-v for v in f)
        if f == neg:
            return cls.constant(len(f), amplitude)
        return cls.from_terms(len(f), {f: amplitude / 2, neg: amplitude / 2})

    @classmethod
    def sine(cls, freq: Iterable[int], amplitude: float = 1.0) -> TrigPolynomial:
        """amplitude * sin(2 pi freq.u)."""
        f = tuple(int(v) for v in freq)
        neg = tuple(-v for v in f)
        if f == neg:
            return cls.zero(len(f))
        return cls.from_terms(len(f), {f: amplitude / 2j, neg: -amplitude / 2j})

    # -- algebra ------------------------------------------------------------

    def terms(self) -> dict[tuple[int, ...], complex]:
        out: dict[tuple[int, ...], complex] = {}
        for f, c in zip(self.freqs, self.coeffs, strict=True):
            key = tuple(int(v) for v in f)
            out[key] = out.get(key, 0) + complex(c)
        return out

    def simplified(self) -> TrigPolynomial:
        return TrigPolynomial.from_terms(self.dim, self.terms())

    def __add__(self, other: TrigPolynomial) -> TrigPolynomial:
        terms = self.terms()
        for k, v in other.terms().items():
            terms[k] = terms.get(k, 0) + v
        return TrigPolynomial.from_terms(self.dim, terms)

    def __mul__(self, other: object) -> TrigPolynomial:
        if isinstance(other, TrigPolynomial):
            terms: dict[tuple[int, ...], complex] = {}
            for fa, ca in self.terms().items():
                for fb, cb in other.terms().items():
                    key = tuple(a + b for a, b in zip(fa, fb, strict=True))
                    terms[key] = terms.get(key, 0) + ca * cb
            return TrigPolynomial.from_terms(self.dim, terms)
        if isinstance(other, int | float | complex | np.number):
            return TrigPolynomial(self.freqs, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def shifted(self, offset: np.ndarray) -> TrigPolynomial:
        """u -> f(u + offset)."""
        phase = np.exp(2j * np.pi * (self.freqs @ np.asarray(offset, dtype=float)))
        return TrigPolynomial(self.freqs, self.coeffs * phase)

    def derivative(self, axis: int) -> TrigPolynomial:
        """Partial derivative in the cell coordinate u_axis."""
        return TrigPolynomial(self.freqs, self.coeffs * (2j * np.pi * self.freqs[:, axis]))

    def bound(self) -> float:
        """Sum of |coefficients|, an upper bound for the sup-norm."""
        return float(np.abs(self.coeffs).sum())

    def bandwidth(self) -> int:
        return int(np.abs(self.freqs).max()) if len(self.coeffs) else 0

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def mean(self) -> complex:
        return self.terms().get((0,) * self.dim, 0j)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Evaluate at cell coordinates of shape (..., d)."""
        u = np.asarray(u, dtype=float)
        if len(self.coeffs) == 0:
            return np.zeros(u.shape[:-1], dtype=np.complex128)
        phase = 2 * np.pi * (u @ self.freqs.T)
        return np.exp(1j * phase) @ self.coeffs


# ---------------------------------------------------------------------------
# Form fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FormField:
    """Homogeneous degree-``degree`` form on an n-torus with trig coefficients."""

    dim: int
    degree: int
    components: Mapping[int, TrigPolynomial]  # bitmask -> coefficient of dx^I

    def __post_init__(self) -> None:
        for mask, poly in self.components.items():
            if int(grades(self.dim)[mask]) != self.degree:
                raise DimensionMismatchError(
                    f"component {bin(mask)} does not have degree {self.degree}"
                )
            if poly.dim != self.dim:
                raise DimensionMismatchError("coefficient dimension differs from form dimension")
        object.__setattr__(self, "components", dict(self.components))

    # -- constructors -------------------------------------------------------

    @classmethod
    def function(cls, poly: TrigPolynomial) -> FormField:
        return cls(poly.dim, 0, {0: poly})

    @classmethod
    def constant(cls, dim: int, indices: Iterable[int], value: complex = 1.0) -> FormField:
        """value * dx^{i1} ^ ... ^ dx^{ik} for increasing 1-based indices."""
        idx = tuple(indices)
        return cls(dim, len(idx), {mask_of(idx): TrigPolynomial.constant(dim, value)})

    @classmethod
    def zero(cls, dim: int, degree: int) -> FormField:
        return cls(dim, degree, {})

    # -- algebra ------------------------------------------------------------

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components.values())

    def scaled(self, factor: complex) -> FormField:
        return FormField(self.dim, self.degree, {m: p * factor for m, p in self.components.items()})

    def __add__(self, other: FormField) -> FormField:
        if (other.dim, other.degree) != (self.dim, self.degree):
            raise DimensionMismatchError("can only add forms of equal dimension and degree")
        comps = dict(self.components)
        for m, p in other.components.items():
            comps[m] = comps[m] + p if m in comps else p
        return FormField(self.dim, self.degree, comps)

    def wedge(self, other: FormField) -> FormField:
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimension mismatch: {self.dim} vs {other.dim}")
        table = sign_tables(self.dim)[1]
        comps: dict[int, TrigPolynomial] = {}
        for ma, pa in self.components.items():
            for mb, pb in other.components.items():
                sign = int(table[ma, mb])
                if sign == 0:
                    continue
                term = pa * pb * sign
                key = ma ^ mb
                comps[key] = comps[key] + term if key in comps else term
        return FormField(self.dim, self.degree + other.degree, comps)

    def shifted(self, offset: np.ndarray) -> FormField:
        return FormField(
            self.dim, self.degree, {m: p.shifted(offset) for m, p in self.components.items()}
        )

    def exterior_derivative(self, inverse_lattice: np.ndarray) -> FormField:
        """d of the form; d/dx_i = sum_j (L^{-1})_{ji} d/du_j."""
        table = sign_tables(self.dim)[1]
        comps: dict[int, TrigPolynomial] = {}
        for mask, poly in self.components.items():
            for i in range(self.dim):
                sign = int(table[1 << i, mask])
                if sign == 0:
                    continue
                partial = TrigPolynomial.zero(self.dim)
                for j in range(self.dim):
                    weight = inverse_lattice[j, i]
                    if weight != 0:
                        partial = partial + poly.derivative(j) * weight
                key = mask | (1 << i)
                term = partial * sign
                comps[key] = comps[key] + term if key in comps else term
        return FormField(self.dim, self.degree + 1, comps)

    # -- evaluation ---------------------------------------------------------

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        """Coefficient arrays (..., 2^n) at cell coordinates u of shape (..., n)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros((*u.shape[:-1], 1 << self.dim), dtype=np.complex128)
        for mask, poly in self.components.items():
            out[..., mask] = poly(u)
        return out

    def bound(self) -> float:
        """Upper bound of the l1 coefficient norm over the torus."""
        return float(sum(p.bound() for p in self.components.values()))

    def bandwidth(self) -> int:
        return max((p.bandwidth() for p in self.components.values()), default=0)

    def frequency_table(self) -> dict[tuple[int, ...], np.ndarray]:
        """{frequency: Clifford coefficient vector} for the spectral evaluator."""
        table: dict[tuple[int, ...], np.ndarray] = {}
        for mask, poly in self.components.items():
            for freq, c in poly.terms().items():
                vec = table.setdefault(freq, np.zeros(1 << self.dim, dtype=np.complex128))
                vec[mask] += c
        return table


def wedge_all(fields: Iterable[FormField]) -> FormField:
    """Left-to-right exterior product of a non-empty sequence."""
    items = list(fields)
    out = items[0]
    for f in items[1:]:
        out = out.wedge(f)
    return out


def random_form_field(
    rng: np.random.Generator, dim: int, degree: int, bandwidth: int = 1, scale: float = 1.0
) -> FormField:
    """Random real form whose coefficients are trig polynomials of small bandwidth."""
    comps: dict[int, TrigPolynomial] = {}
    masks = [mask_of(c) for c in itertools.combinations(range(1, dim + 1), degree)]
    freqs = list(itertools.product(range(-bandwidth, bandwidth + 1), repeat=dim))
    for mask in masks:
        terms: dict[tuple[int, ...], complex] = {}
        for f in freqs:
            neg = tuple(-v for v in f)
            if f in terms:
                continue
            value = scale * complex(rng.normal(), rng.normal()) / len(freqs)
            if f == neg:
                terms[f] = value.real
            else:
                terms[f] = value
                terms[neg] = value.conjugate()
        comps[mask] = TrigPolynomial.from_terms(dim, terms)
    return FormField(dim, degree, comps)
