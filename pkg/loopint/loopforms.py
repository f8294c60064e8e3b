"""Finitely generated integral forms on the loop space of a flat torus.

A ``BlockTerm`` is a coefficient times a wedge of factors, each factor being a
time profile (a point mass or a trigonometric density on the circle) paired
with a form field on the torus. Factors are listed right to left: the term
``(f_1, ..., f_M)`` stands for f_M ^ ... ^ f_1, so ``wedge(a, b)`` lists the
factors of ``b`` first. This is the order in which the Dirac density sorts
factors onto increasing times.

Each factor records its evaluation weight: sqrt(l) for a lifted degree-l form
and 1 for an insertion. The Dirac density divides by sqrt(l) again, which is
the Jacobian of the cube embedding of a degree-l block.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from loopint.errors import DimensionMismatchError, GridError
from loopint.fields import FormField, TrigPolynomial
from loopint.geometry import DiscreteLoop, DiscretePath

# ---------------------------------------------------------------------------
# Time profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    """Dirac measure at time tau in [0, 1)."""

    tau: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau < 1.0:
            raise GridError(f"point mass time must lie in [0, 1), got {self.tau}")

    @property
    def total_variation(self) -> float:
        return 1.0

    def shifted(self, t: float) -> PointMass:
        tau = (self.tau - t) % 1.0
        return PointMass(0.0 if tau >= 1.0 else tau)


@dataclass(frozen=True, eq=False)
class Density:
    """Density phi(t) dt on the circle, a trig polynomial or a tabulated grid.

    Tabulated densities are periodic and linearly interpolated.
    """

    poly: TrigPolynomial | None = None
    table: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.poly is None) == (self.table is None):
            raise ValueError("a density needs exactly one of poly or table")
        if self.poly is not None and self.poly.dim != 1:
            raise DimensionMismatchError("density polynomials live on the circle")
        if self.table is not None:
            table = np.asarray(self.table, dtype=np.complex128)
            table.setflags(write=False)
            object.__setattr__(self, "table", table)

    @classmethod
    def constant(cls, value: complex = 1.0) -> Density:
        return cls(poly=TrigPolynomial.constant(1, value))

    @classmethod
    def tabulated(cls, values: Sequence[complex]) -> Density:
        return cls(table=np.asarray(values))

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.poly is not None:
            return self.poly(t[..., None])
        k = len(self.table)
        grid = np.arange(k + 1) / k
        vals = np.append(self.table, self.table[0])
        s = np.mod(t, 1.0)
        return np.interp(s, grid, vals.real) + 1j * np.interp(s, grid, vals.imag)

    @property
    def total_variation(self) -> float:
        """Upper bound of int |phi|."""
        if self.poly is not None:
            return self.poly.bound()
        return float(np.abs(self.table).max())

    def shifted(self, t: float) -> Density:
        """The profile tau -> phi(tau + t)."""
        if self.poly is not None:
            return Density(poly=self.poly.shifted(np.array([t])))
        k = len(self.table)
        return Density(table=self(np.arange(k) / k + t))


TimeProfile = PointMass | Density


def _norm_scale(degree: int) -> float:
    return math.sqrt(degree) if degree > 0 else 1.0


# ---------------------------------------------------------------------------
# Block terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Factor:
    profile: TimeProfile
    field: FormField
    weight: complex = 1.0

    @property
    def degree(self) -> int:
        return self.field.degree

    @property
    def q_weight(self) -> complex:
        """Weight entering the Dirac density: weight / sqrt(degree)."""
        return self.weight / _norm_scale(self.degree)

    @property
    def is_point(self) -> bool:
        return isinstance(self.profile, PointMass)

    def shifted(self, t: float) -> Factor:
        return replace(self, profile=self.profile.shifted(t))


@dataclass(frozen=True, eq=False)
class BlockTerm:
    """coeff * f_M ^ ... ^ f_1 for factors listed (f_1, ..., f_M)."""

    factors: tuple[Factor, ...]
    coeff: complex = 1.0

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(f.degree for f in self.factors)

    @property
    def degree(self) -> int:
        return sum(self.degrees)

    @property
    def positive_factors(self) -> int:
        return sum(1 for d in self.degrees if d > 0)

    def scaled(self, c: complex) -> BlockTerm:
        return BlockTerm(self.factors, self.coeff * c)

    def shifted(self, t: float) -> BlockTerm:
        return BlockTerm(tuple(f.shifted(t) for f in self.factors), self.coeff)

    def coincident_pairs(self, atol: float = 1e-14) -> list[tuple[int, int]]:
        points = [(i, f.profile.tau) for i, f in enumerate(self.factors) if f.is_point]
        return [
            (i, j)
            for (i, a), (j, b) in itertools.combinations(points, 2)
            if abs(a - b) <= atol
        ]


@dataclass(frozen=True, eq=False)
class IntegralForm:
    """Finite sum of block terms over an n-torus."""

    dim: int
    terms: tuple[BlockTerm, ...] = ()

    def __post_init__(self) -> None:
        for term in self.terms:
            for f in term.factors:
                if f.field.dim != self.dim:
                    raise DimensionMismatchError(
                        f"factor over dimension {f.field.dim} in a form over {self.dim}"
                    )

    @classmethod
    def zero(cls, dim: int) -> IntegralForm:
        return cls(dim, ())

    @classmethod
    def unit(cls, dim: int, value: complex = 1.0) -> IntegralForm:
        return cls(dim, (BlockTerm((), value),))

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {t.degree for t in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    @property
    def degree(self) -> int:
        degrees = self.degrees()
        if len(degrees) != 1:
            raise ValueError("form is not homogeneous")
        return degrees.pop()

    def __add__(self, other: IntegralForm) -> IntegralForm:
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return IntegralForm(self.dim, self.terms + other.terms)

    def __sub__(self, other: IntegralForm) -> IntegralForm:
        return self + other * -1

    def __mul__(self, c: object) -> IntegralForm:
        if not isinstance(c, int | float | complex | np.number):
            return NotImplemented
        return IntegralForm(self.dim, tuple(t.scaled(complex(c)) for t in self.terms))

    __rmul__ = __mul__

    def __xor__(self, other: IntegralForm) -> IntegralForm:
        return wedge(self, other)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def lift_form(phi: Density, form: FormField) -> IntegralForm:
    """P_phi of a degree-l form: sqrt(l) int phi(t) form(gamma(t))[...] dt."""
    if form.is_zero():
        return IntegralForm.zero(form.dim)
    factor = Factor(phi, form, _norm_scale(form.degree))
    return IntegralForm(form.dim, (BlockTerm((factor,)),))


def lift_function(phi: Density, f: TrigPolynomial) -> IntegralForm:
    return lift_form(phi, FormField.function(f))


def insert_at(tau: float, form: FormField) -> IntegralForm:
    """Pull-back of a form by evaluation at time tau."""
    if form.is_zero():
        return IntegralForm.zero(form.dim)
    return IntegralForm(form.dim, (BlockTerm((Factor(PointMass(tau), form),)),))


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------


def wedge(theta: IntegralForm, zeta: IntegralForm) -> IntegralForm:
    """theta ^ zeta, distributed over block terms."""
    if theta.dim != zeta.dim:
        raise DimensionMismatchError(f"dimension mismatch: {theta.dim} vs {zeta.dim}")
    terms = tuple(
        BlockTerm(b.factors + a.factors, a.coeff * b.coeff)
        for a in theta.terms
        for b in zeta.terms
    )
    return IntegralForm(theta.dim, terms)


def wedge_all(forms: Iterable[IntegralForm]) -> IntegralForm:
    items = list(forms)
    out = items[0]
    for f in items[1:]:
        out = wedge(out, f)
    return out


def rotate(t: float, theta: IntegralForm) -> IntegralForm:
    """Push forward under the rotation gamma -> gamma(. + t)."""
    if t == 0:
        return theta
    return IntegralForm(theta.dim, tuple(term.shifted(t) for term in theta.terms))


def average(theta: IntegralForm, k: int) -> IntegralForm:
    """(1/k) sum_j rotate(j/k, theta)."""
    if k < 1:
        raise GridError("averaging needs at least one rotation")
    out = IntegralForm.zero(theta.dim)
    for j in range(k):
        out = out + rotate(j / k, theta) * (1.0 / k)
    return out


def average_profile(phi: Density, k: int) -> Density:
    """Rotation average of a single trig density: keeps frequencies divisible by k."""
    if phi.poly is None:
        raise ValueError("profile averaging is exact only for trig densities")
    terms = {f: c for f, c in phi.poly.terms().items() if f[0] % k == 0}
    return Density(poly=TrigPolynomial.from_terms(1, terms))


# ---------------------------------------------------------------------------
# Diagonal blocks
# ---------------------------------------------------------------------------


def _merge_pair(term: BlockTerm, i: int, j: int) -> BlockTerm:
    """Merge coincident point factors i < j into one factor f_j ^ f_i at position i."""
    factors = list(term.factors)
    between = sum(f.degree for f in factors[i + 1 : j])
    sign = -1 if (factors[j].degree * between) % 2 else 1
    a, b = factors[i], factors[j]
    merged = Factor(a.profile, b.field.wedge(a.field), a.weight * b.weight)
    factors[i] = merged
    del factors[j]
    return BlockTerm(tuple(factors), term.coeff * sign)


def decompose_blocks(theta: IntegralForm) -> IntegralForm:
    """Merge coincident point masses into single higher-degree insertions.

    Moving a factor next to its partner picks up the Koszul sign; the merged
    factor's Dirac weight carries the cube Jacobian, so block norms are kept.
    """
    terms = []
    for term in theta.terms:
        pairs = term.coincident_pairs()
        while pairs:
            term = _merge_pair(term, *pairs[0])
            pairs = term.coincident_pairs()
        if not any(f.field.is_zero() for f in term.factors):
            terms.append(term)
    return IntegralForm(theta.dim, tuple(terms))


def embed_blocks(theta: IntegralForm) -> IntegralForm:
    """Inverse of decompose_blocks: split degree-l insertions into l coincident 1-forms."""
    out: list[BlockTerm] = []
    for term in theta.terms:
        expansions: list[list[tuple[Factor, ...]]] = []
        for f in term.factors:
            if not f.is_point or f.degree <= 1:
                expansions.append([(f,)])
                continue
            options = []
            for mask, poly in f.field.components.items():
                idx = [i + 1 for i in range(f.field.dim) if mask >> i & 1]
                pieces = [
                    Factor(f.profile, FormField.constant(f.field.dim, (i,)))
                    for i in reversed(idx)
                ]
                pieces[0] = Factor(
                    f.profile,
                    FormField(f.field.dim, 1, {1 << (idx[-1] - 1): poly}),
                    f.weight,
                )
                options.append(tuple(pieces))
            expansions.append(options)
        for combo in itertools.product(*expansions):
            factors = tuple(itertools.chain.from_iterable(combo))
            out.append(BlockTerm(factors, term.coeff))
    return IntegralForm(theta.dim, tuple(out))


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def norm(theta: IntegralForm) -> float:
    """Upper bound for the total-variation norm.

    Per term: |coeff| times the product over factors of |Dirac weight|, profile
    total variation and the l1 sup bound of the coefficient field. The l1
    coefficient norm is submultiplicative under Clifford products.
    """
    total = 0.0
    for term in theta.terms:
        value = abs(term.coeff)
        for f in term.factors:
            value *= abs(f.q_weight) * f.profile.total_variation * f.field.bound()
        total += value
    return total


def block_norm(factor: Factor, x: np.ndarray, torus_inverse: np.ndarray) -> float:
    """Norm of a single insertion at the point x: |Dirac weight| * |form(x)|."""
    coeffs = factor.field.coefficients(np.asarray(x) @ torus_inverse.T)
    return abs(factor.q_weight) * float(np.linalg.norm(coeffs))


def cube_norm(group: Sequence[Factor], x: np.ndarray, torus_inverse: np.ndarray) -> float:
    """Norm of l coincident 1-form insertions, computed on the l-cube.

    The antisymmetrised tensor of the covectors is built explicitly; its
    Hilbert-Schmidt norm divided by sqrt(l * l!) and multiplied by the
    product of the Dirac weights is the norm of the diagonal block.
    """
    ell = len(group)
    if any(f.degree != 1 for f in group):
        raise ValueError("cube norm is defined for 1-form insertions")
    u = np.asarray(x) @ torus_inverse.T
    n = group[0].field.dim
    covectors = [f.field.coefficients(u)[[1 << i for i in range(n)]] for f in group]
    tensor = np.zeros((n,) * ell, dtype=np.complex128)
    for perm in itertools.permutations(range(ell)):
        sign = _perm_sign(perm)
        term = covectors[perm[0]]
        for k in perm[1:]:
            term = np.multiply.outer(term, covectors[k])
        tensor += sign * term
    weight = np.prod([abs(f.q_weight) for f in group])
    return float(weight * np.linalg.norm(tensor) / math.sqrt(ell * math.factorial(ell)))


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            if seen[i] > seen[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Brute-force evaluation on vector fields
# ---------------------------------------------------------------------------


def _form_on_vectors(field: FormField, u: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """field(x)[w_1, ..., w_l] at nodes; u (k, n), vectors (l, k, n) -> (k,)."""
    ell = field.degree
    if ell == 0:
        return field.coefficients(u)[..., 0]
    coeffs = field.coefficients(u)
    out = np.zeros(u.shape[0], dtype=np.complex128)
    for mask in field.components:
        idx = [i for i in range(field.dim) if mask >> i & 1]
        minors = np.linalg.det(np.moveaxis(vectors[:, :, idx], 0, 1))
        out += coeffs[:, mask] * minors
    return out


def _factor_value(
    f: Factor, path: DiscretePath, times: np.ndarray, weights: np.ndarray, vectors: np.ndarray
) -> complex:
    torus = path.torus
    if isinstance(f.profile, PointMass):
        tau = np.array([f.profile.tau])
        u = torus.to_unit(path.position(tau)[0])
        vec = _interp_vectors(path.times, vectors, tau)
        return complex(f.weight * _form_on_vectors(f.field, u, vec)[0])
    u = torus.to_unit(path.lifts[0, :-1])
    vals = _form_on_vectors(f.field, u, vectors[:, :-1])
    return complex(f.weight * np.sum(f.profile(times) * weights * vals))


def _interp_vectors(times: np.ndarray, vectors: np.ndarray, tau: np.ndarray) -> np.ndarray:
    out = np.empty((vectors.shape[0], len(tau), vectors.shape[2]))
    for i in range(vectors.shape[0]):
        for k in range(vectors.shape[2]):
            out[i, :, k] = np.interp(tau, times, vectors[i, :, k])
    return out


def evaluate_form(theta: IntegralForm, loop: DiscreteLoop, vectors: np.ndarray) -> complex:
    """theta|_gamma[V_1, ..., V_N] for the first loop of the batch.

    ``vectors`` has shape (N, m, n): periodic vector fields along the loop,
    linear between grid nodes. Densities are integrated with the uniform rule
    on the loop grid. Wedges are expanded by full alternation over S_N.
    """
    vectors = np.asarray(vectors, dtype=float)
    path = loop.select(0).as_path()
    closed = np.concatenate([vectors, vectors[:, :1]], axis=1)
    times = loop.times
    weights = np.diff(np.append(times, 1.0))
    total = 0j
    for term in theta.terms:
        n_total = term.degree
        if n_total != vectors.shape[0]:
            continue
        order = list(reversed(term.factors))
        bounds = np.cumsum([0] + [f.degree for f in order])
        acc = 0j
        for perm in itertools.permutations(range(n_total)):
            value = complex(_perm_sign(perm))
            for k, f in enumerate(order):
                slots = list(perm[bounds[k] : bounds[k + 1]])
                value *= _factor_value(f, path, times, weights, closed[slots])
                if value == 0:
                    break
            acc += value
        norm_factor = math.prod(math.factorial(f.degree) for f in order)
        total += term.coeff * acc / norm_factor
    return total
