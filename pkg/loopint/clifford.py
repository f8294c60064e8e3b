"""Clifford and exterior algebra over R^n with supertraces and super signs.

Elements are stored as coefficient vectors over the 2^n monomials e_A, where
A is a subset of {1..n} encoded as a bitmask (bit i-1 set when e_i occurs).
The same layout carries both the exterior product and the Clifford product
with relation v.v = -|v|^2, so the quantization map is the identity on
coefficients.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from functools import lru_cache

import numpy as np

from loopint.errors import DimensionMismatchError, NonHomogeneousError

logger = logging.getLogger(__name__)

MAX_DIM = 12

# ---------------------------------------------------------------------------
# Sign tables
# ---------------------------------------------------------------------------


def _popcount(values: np.ndarray) -> np.ndarray:
    count = np.zeros_like(values)
    work = values.copy()
    while np.any(work):
        count += work & 1
        work >>= 1
    return count


@lru_cache(maxsize=None)
def sign_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (clifford_sign, exterior_sign) tables of shape (2^n, 2^n).

    The product of monomials e_A and e_B is sign[A, B] * e_{A xor B}.
    """
    if not 1 <= n <= MAX_DIM:
        raise DimensionMismatchError(f"dimension must be in 1..{MAX_DIM}, got {n}")
    idx = np.arange(1 << n, dtype=np.int64)
    a = idx[:, None]
    b = idx[None, :]
    swaps = np.zeros((1 << n, 1 << n), dtype=np.int64)
    for j in range(n):
        swaps += ((b >> j) & 1) * _popcount(a >> (j + 1))
    overlap = _popcount(a & b)
    clifford = np.where((swaps + overlap) % 2 == 0, 1, -1).astype(np.int8)
    exterior = np.where(overlap == 0, np.where(swaps % 2 == 0, 1, -1), 0).astype(np.int8)
    clifford.setflags(write=False)
    exterior.setflags(write=False)
    logger.debug("built sign tables for n=%d", n)
    return clifford, exterior


@lru_cache(maxsize=None)
def grades(n: int) -> np.ndarray:
    """Cardinality of each basis monomial."""
    out = _popcount(np.arange(1 << n, dtype=np.int64))
    out.setflags(write=False)
    return out


def labels(n: int) -> list[str]:
    """Human-readable monomial labels in storage order ("1", "e1", "e1e2", ...)."""
    out = []
    for mask in range(1 << n):
        if mask == 0:
            out.append("1")
        else:
            out.append("".join(f"e{i + 1}" for i in range(n) if mask >> i & 1))
    return out


def mask_of(indices: Sequence[int]) -> int:
    """Bitmask of an increasing 1-based index tuple, e.g. (1, 3) -> 0b101."""
    mask = 0
    for i in indices:
        mask |= 1 << (i - 1)
    return mask


# ---------------------------------------------------------------------------
# Array kernels (batched over leading axes)
# ---------------------------------------------------------------------------


def _product_arrays(x: np.ndarray, y: np.ndarray, table: np.ndarray) -> np.ndarray:
    size = table.shape[0]
    idx = np.arange(size)
    shape = np.broadcast_shapes(x.shape, y.shape)
    out = np.zeros(shape, dtype=np.result_type(x, y, np.float64))
    for k in range(size):
        xk = x[..., k : k + 1]
        if not np.any(xk):
            continue
        out[..., k ^ idx] += table[k] * xk * y
    return out


def clifford_product_arrays(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    """Clifford product of coefficient arrays of shape (..., 2^n)."""
    return _product_arrays(x, y, sign_tables(n)[0])


def exterior_product_arrays(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    """Exterior product of coefficient arrays of shape (..., 2^n)."""
    return _product_arrays(x, y, sign_tables(n)[1])


def supertrace_arrays(x: np.ndarray, n: int) -> np.ndarray:
    """2^{n/2} times the top coefficient, over the leading axes."""
    return 2.0 ** (n / 2) * x[..., (1 << n) - 1]


def left_matrix_arrays(x: np.ndarray, n: int) -> np.ndarray:
    """Left-regular representation: (..., 2^n) -> (..., 2^n, 2^n)."""
    table = sign_tables(n)[0]
    size = 1 << n
    idx = np.arange(size)
    out = np.zeros((*x.shape[:-1], size, size), dtype=np.result_type(x, np.float64))
    for k in range(size):
        out[..., k ^ idx, idx] += table[k] * x[..., k : k + 1]
    return out


# ---------------------------------------------------------------------------
# Element type
# ---------------------------------------------------------------------------


class CliffordElement:
    """Coefficient vector over the monomial basis of Cl_n (or Lambda R^n).

    Complex coefficients give the complexified algebra with the same layout.
    """

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs: np.ndarray | Sequence[complex]) -> None:
        arr = np.array(coeffs)
        if arr.shape != (1 << dim,):
            raise DimensionMismatchError(
                f"expected {1 << dim} coefficients for dim {dim}, got shape {arr.shape}"
            )
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64)
        arr.setflags(write=False)
        self.dim = dim
        self.coeffs = arr

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> CliffordElement:
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: complex = 1.0) -> CliffordElement:
        coeffs = np.zeros(1 << dim, dtype=np.result_type(value, np.float64))
        coeffs[0] = value
        return cls(dim, coeffs)

    @classmethod
    def monomial(cls, dim: int, indices: Sequence[int], value: complex = 1.0) -> CliffordElement:
        """The increasing monomial e_{i1}...e_{ik} (1-based indices) times value."""
        if any(b <= a for a, b in itertools.pairwise(indices)):
            raise ValueError(f"indices must be strictly increasing: {tuple(indices)}")
        coeffs = np.zeros(1 << dim, dtype=np.result_type(value, np.float64))
        coeffs[mask_of(indices)] = value
        return cls(dim, coeffs)

    @classmethod
    def vector(cls, values: Sequence[complex]) -> CliffordElement:
        dim = len(values)
        coeffs = np.zeros(1 << dim, dtype=np.result_type(*values, np.float64))
        for i, v in enumerate(values):
            coeffs[1 << i] = v
        return cls(dim, coeffs)

    @classmethod
    def volume(cls, dim: int) -> CliffordElement:
        return cls.monomial(dim, tuple(range(1, dim + 1)))

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: CliffordElement) -> None:
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: CliffordElement) -> CliffordElement:
        self._check(other)
        return CliffordElement(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: CliffordElement) -> CliffordElement:
        self._check(other)
        return CliffordElement(self.dim, self.coeffs - other.coeffs)

    def __neg__(self) -> CliffordElement:
        return CliffordElement(self.dim, -self.coeffs)

    def __mul__(self, other: object) -> CliffordElement:
        if isinstance(other, CliffordElement):
            return clifford_mul(self, other)
        if isinstance(other, int | float | complex | np.number):
            return CliffordElement(self.dim, self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other: object) -> CliffordElement:
        if isinstance(other, int | float | complex | np.number):
            return CliffordElement(self.dim, self.coeffs * other)
        return NotImplemented

    def __xor__(self, other: CliffordElement) -> CliffordElement:
        return exterior_mul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CliffordElement):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None  # type: ignore[assignment]

    def allclose(self, other: CliffordElement, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        terms = [
            f"{c:g}*{lab}" if lab != "1" else f"{c:g}"
            for c, lab in zip(self.coeffs, labels(self.dim), strict=True)
            if c != 0
        ]
        return f"CliffordElement(dim={self.dim}, {' + '.join(terms) or '0'})"

    # -- grading ------------------------------------------------------------

    def grade_part(self, k: int) -> CliffordElement:
        mask = grades(self.dim) == k
        return CliffordElement(self.dim, np.where(mask, self.coeffs, 0))

    def even_part(self) -> CliffordElement:
        return CliffordElement(self.dim, np.where(grades(self.dim) % 2 == 0, self.coeffs, 0))

    def odd_part(self) -> CliffordElement:
        return CliffordElement(self.dim, np.where(grades(self.dim) % 2 == 1, self.coeffs, 0))

    def is_even(self) -> bool:
        return not np.any(self.odd_part().coeffs)

    def is_odd(self) -> bool:
        return not np.any(self.even_part().coeffs)

    def parity(self) -> int:
        """Parity of a homogeneous element (zero counts as even)."""
        if self.is_even():
            return 0
        if self.is_odd():
            return 1
        raise NonHomogeneousError(f"element has mixed parity: {self!r}")

    def inner(self, other: CliffordElement) -> complex:
        """Inner product making the monomial basis orthonormal."""
        self._check(other)
        value = np.vdot(other.coeffs, self.coeffs)
        return complex(value) if np.iscomplexobj(value) else float(value)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def exterior_mul(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Wedge product; zero on overlapping monomials."""
    a._check(b)
    return CliffordElement(a.dim, exterior_product_arrays(a.coeffs, b.coeffs, a.dim))


def clifford_mul(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Clifford product with e_i e_i = -1 and e_i e_j = -e_j e_i for i != j."""
    a._check(b)
    return CliffordElement(a.dim, clifford_product_arrays(a.coeffs, b.coeffs, a.dim))


def quantize(a: CliffordElement) -> CliffordElement:
    """Send e_{i1} ^ ... ^ e_{ik} to the Clifford product e_{i1}...e_{ik}."""
    return CliffordElement(a.dim, a.coeffs.copy())


def dequantize(a: CliffordElement) -> CliffordElement:
    """Inverse of quantize."""
    return CliffordElement(a.dim, a.coeffs.copy())


def supertrace(a: CliffordElement) -> complex:
    """str(a) = 2^{n/2} <a, c(vol)>."""
    value = supertrace_arrays(a.coeffs, a.dim)
    return complex(value) if np.iscomplexobj(value) else float(value)


def complex_trace(a: CliffordElement) -> complex:
    """Trace of a on the complex spinor module.

    Odd n = 2m+1 uses i(2i)^m a_top + 2^m a_0; even n uses (-i)^{n/2} str(a).
    """
    n = a.dim
    top = a.coeffs[(1 << n) - 1]
    if n % 2 == 1:
        m = (n - 1) // 2
        return complex(1j * (2j) ** m * top + 2**m * a.coeffs[0])
    return complex((-1j) ** (n // 2) * supertrace(a))


def left_matrix(a: CliffordElement) -> np.ndarray:
    """Matrix of left multiplication by a on Cl_n."""
    return left_matrix_arrays(a.coeffs, a.dim)


def element_from_matrix(matrix: np.ndarray, n: int) -> CliffordElement:
    """Recover a from its left-multiplication matrix (image of the unit)."""
    return CliffordElement(n, matrix[:, 0])


def twisted_supertrace(matrix: np.ndarray, n: int, parities: Sequence[int]) -> complex:
    """Supertrace on Cl_n (x) End(V) for a matrix on Cl_n (x) V.

    The matrix acts on the Kronecker product space with the Clifford index
    outer and the V index inner; V carries the given super parities.
    """
    r = len(parities)
    size = 1 << n
    blocks = np.asarray(matrix).reshape(size, r, size, r)
    grading = np.array([(-1) ** p for p in parities])
    v_str = np.einsum("aibi,i->ab", blocks, grading)
    value = supertrace_arrays(v_str[:, 0], n)
    return complex(value)


# ---------------------------------------------------------------------------
# Super signs
# ---------------------------------------------------------------------------


def super_sign(sigma: Sequence[int], degrees: Sequence[int]) -> int:
    """Koszul sign sgn(sigma; l).

    ``degrees[j]`` is the degree of factor j+1 and ``sigma[j]`` is the
    0-based image of j. The sign is defined by
    v_{sigma N} ... v_{sigma 1} = sgn * v_N ... v_1 for supercommuting
    factors of the given parities.
    """
    if len(sigma) != len(degrees):
        raise DimensionMismatchError(
            f"permutation of size {len(sigma)} vs {len(degrees)} degrees"
        )
    if sorted(sigma) != list(range(len(sigma))):
        raise ValueError(f"not a permutation: {tuple(sigma)}")
    # left-to-right listing of v_{sigma N} ... v_{sigma 1}
    seq = list(reversed(sigma))
    odd = [degrees[k] % 2 == 1 for k in seq]
    flips = 0
    for p in range(len(seq)):
        if not odd[p]:
            continue
        for q in range(p + 1, len(seq)):
            if odd[q] and seq[p] < seq[q]:
                flips += 1
    return -1 if flips % 2 else 1


def compose(sigma: Sequence[int], rho: Sequence[int]) -> tuple[int, ...]:
    """sigma o rho as 0-based tuples."""
    return tuple(sigma[r] for r in rho)


def permute_degrees(degrees: Sequence[int], sigma: Sequence[int]) -> tuple[int, ...]:
    """l^sigma with (l^sigma)_j = l_{sigma j}."""
    return tuple(degrees[s] for s in sigma)


def susy_permute(
    sigma: Sequence[int], factors: Sequence[CliffordElement]
) -> tuple[int, list[CliffordElement]]:
    """Supersymmetry operator on v_N (x) ... (x) v_1.

    ``factors[j]`` is v_{j+1}. Returns the sign and the permuted factors
    (v_{sigma 1}, ..., v_{sigma N}).
    """
    degrees = [f.parity() for f in factors]
    sign = super_sign(sigma, degrees)
    return sign, [factors[s] for s in sigma]


def random_homogeneous(
    rng: np.random.Generator, n: int, parity: int | None = None
) -> CliffordElement:
    """Random element supported on monomials of one parity."""
    if parity is None:
        parity = int(rng.integers(2))
    coeffs = rng.normal(size=1 << n)
    coeffs[grades(n) % 2 != parity] = 0.0
    return CliffordElement(n, coeffs)
