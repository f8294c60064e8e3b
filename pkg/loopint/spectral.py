"""Truncated spectral data of Dirac operators on flat tori and the circle.

Untwisted operators are diagonal in Fourier modes e^{2 pi i (k + e/2) . u}.
Flux-twisted operators on T^2 use the Landau-level closed form, with a
Peierls lattice Laplacian as an independent multiplicity check. On the circle
the family D_s = -i d/dx + s c(omega) is built explicitly, c(omega) acting as
2 pi m / length on each summand.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.special

from loopint.bundles import GaugeMap, TwistBundle
from loopint.clifford import CliffordElement, complex_trace, left_matrix_arrays
from loopint.errors import (
    GridError,
    SpectralCutoffError,
    TrackingAmbiguityError,
    UnsupportedBackendError,
)
from loopint.fields import FormField
from loopint.geometry import FlatTorus
from loopint.phases import integral_from_index

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOLERANCE = 1e-10

# ---------------------------------------------------------------------------
# Fourier modes
# ---------------------------------------------------------------------------


def mode_energies(torus: FlatTorus, modes: np.ndarray) -> np.ndarray:
    """E(k) = |2 pi L^{-T}(k + e/2)|^2 / 2 for integer modes (..., n)."""
    wave = (modes + torus.epsilon / 2) @ torus.dual.T
    return np.einsum("...n,...n->...", wave, wave) / 2


def fourier_tail(torus: FlatTorus, T: float, cutoff: int, reach: int = 0) -> float:
    """sum over modes outside the cutoff box of exp(-T E(k)), modes pulled in by ``reach``."""
    box = torus.lattice_box(cutoff + 20)
    outside = np.abs(box).max(axis=1) > cutoff
    shrunk = np.sign(box[outside]) * np.maximum(np.abs(box[outside]) - reach, 0)
    return float(np.exp(-T * mode_energies(torus, shrunk)).sum())


def spinor_rank(n: int) -> int:
    return 1 << (n // 2)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralDirac:
    """Eigenvalues with multiplicities of a truncated Dirac operator.

    ``chirality`` is +1/-1 on graded (even-dimensional) kernels and 0 on
    paired or ungraded eigenvalues; super parities of the twist flip it.
    """

    torus: FlatTorus
    kind: str
    cutoff: int
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    chirality: np.ndarray
    twist: TwistBundle | GaugeMap | None = None
    s: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.multiplicities.sum())

    def kernel_dimension(self, atol: float = 1e-9) -> int:
        return int(self.multiplicities[np.abs(self.eigenvalues) < atol].sum())

    def sorted_values(self) -> np.ndarray:
        """Eigenvalues repeated by multiplicity, ascending."""
        return np.sort(np.repeat(self.eigenvalues, self.multiplicities))

    def tail(self, T: float) -> float:
        """Bound on the heat-trace mass beyond the cutoff."""
        if self.kind == "landau":
            total = 0.0
            for flux, b in zip(self.meta["fluxes"], self.meta["field_strengths"], strict=True):
                if flux == 0:
                    total += spinor_rank(2) * fourier_tail(self.torus, T, self.cutoff)
                    continue
                q = math.exp(-T * abs(b))
                total += 2 * abs(flux) * q ** (self.cutoff + 1) / (1 - q)
            return total
        rank = 1 if self.twist is None else self.twist.rank
        reach = int(self.meta.get("reach", 0))
        return rank * spinor_rank(self.torus.dim) * fourier_tail(self.torus, T, self.cutoff, reach)


def _untwisted_parts(
    torus: FlatTorus, cutoff: int, parity: int
) -> tuple[list[float], list[int], list[int]]:
    n = torus.dim
    d = spinor_rank(n)
    modes = torus.lattice_box(cutoff)
    grade = (-1) ** parity
    vals: list[float] = []
    mult: list[int] = []
    chir: list[int] = []
    if n == 1:
        lam = (modes[:, 0] + torus.epsilon[0] / 2) * float(torus.dual[0, 0])
        return lam.tolist(), [1] * len(lam), [0] * len(lam)
    norms = np.sqrt(2 * mode_energies(torus, modes))
    for lam in norms:
        if lam < 1e-12:
            if n % 2 == 0:
                vals += [0.0, 0.0]
                mult += [d // 2, d // 2]
                chir += [grade, -grade]
            else:
                vals.append(0.0)
                mult.append(d)
                chir.append(0)
            continue
        vals += [float(lam), -float(lam)]
        mult += [d // 2, d // 2]
        chir += [0, 0]
    return vals, mult, chir


def landau_levels(
    torus: FlatTorus, k: int, levels: int, parity: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form spectrum of the Dirac operator twisted by the flux-k line on T^2.

    D^2 = 2|B| j for j = 0..levels with B = 2 pi k / vol. Every level carries
    |k| states of each chirality except j = 0, which has |k| states of
    chirality -sign(k); the index is therefore -k.

    Returns:
        (eigenvalues, multiplicities, chirality) arrays.
    """
    if torus.dim != 2:
        raise UnsupportedBackendError("Landau levels live on 2-tori")
    if k == 0:
        raise ValueError("flux must be non-zero")
    b = 2 * math.pi * abs(k) / torus.volume
    grade = (-1) ** parity
    vals = [0.0]
    mult = [abs(k)]
    chir = [-int(np.sign(k)) * grade]
    for j in range(1, levels + 1):
        lam = math.sqrt(2 * b * j)
        vals += [lam, -lam]
        mult += [abs(k), abs(k)]
        chir += [0, 0]
    return np.array(vals), np.array(mult, dtype=np.int64), np.array(chir, dtype=np.int64)


def circle_family_spectrum(g: GaugeMap, s: float, cutoff: int = 24) -> np.ndarray:
    """Eigenvalues of D_s = -i d/dx + s c(omega), one row per summand (r, 2 cutoff + 1)."""
    torus = g.base
    k = np.arange(-cutoff, cutoff + 1) + torus.epsilon[0] / 2
    step = 2 * np.pi / g.length
    m = np.array(g.windings, dtype=float)[:, None]
    return step * (k[None, :] + s * m)


def dirac_spectrum(
    torus: FlatTorus,
    twist: TwistBundle | GaugeMap | None = None,
    cutoff: int = 24,
    s: float = 0.0,
) -> SpectralDirac:
    """Truncated eigen data of the (twisted) Dirac operator.

    Args:
        torus: Flat backend with its spin structure.
        twist: None, a TwistBundle (flat summands or flux lines on T^2), or a
            GaugeMap whose family member at ``s`` is wanted.
        cutoff: Fourier box radius, or the number of Landau levels kept.
        s: Family parameter for gauge maps.

    Raises:
        UnsupportedBackendError: For flux on anything but T^2 or gauge maps off the circle.
    """
    if isinstance(twist, GaugeMap):
        if twist.base is not torus and twist.base.dim != torus.dim:
            raise UnsupportedBackendError("gauge map lives on a different base")
        lam = circle_family_spectrum(twist, s, cutoff).ravel()
        return SpectralDirac(
            twist.base,
            "circle-family",
            cutoff,
            lam,
            np.ones(len(lam), dtype=np.int64),
            np.zeros(len(lam), dtype=np.int64),
            twist,
            s,
            {"reach": max((abs(m) for m in twist.windings), default=0) + 1},
        )
    bundle = twist or TwistBundle.trivial(torus)
    if bundle.base.dim != torus.dim:
        raise UnsupportedBackendError("bundle lives on a different base")
    vals: list[float] = []
    mult: list[int] = []
    chir: list[int] = []
    for summand in bundle.summands:
        if summand.flux == 0:
            v, mu, c = _untwisted_parts(torus, cutoff, summand.parity)
        else:
            v, mu, c = landau_levels(torus, summand.flux, cutoff, summand.parity)
        vals += list(v)
        mult += list(mu)
        chir += list(c)
    kind = "landau" if np.any(bundle.fluxes) else "untwisted"
    meta = {
        "fluxes": [s_.flux for s_ in bundle.summands],
        "field_strengths": list(bundle.field_strengths()) if torus.dim == 2 else [],
    }
    return SpectralDirac(
        torus,
        kind,
        cutoff,
        np.array(vals),
        np.array(mult, dtype=np.int64),
        np.array(chir, dtype=np.int64),
        None if twist is None else bundle,
        0.0,
        meta,
    )


def heat_supertrace(
    spec: SpectralDirac,
    T: float,
    dictionary: bool = False,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> complex:
    """Str_C(e^{-T D^2/2}) = sum chirality * multiplicity * e^{-T lambda^2 / 2}.

    With ``dictionary`` the value is mapped to the real Cl_n-linear
    supertrace, i.e. to what I_T[BCh_T] should equal.

    Raises:
        UnsupportedBackendError: On odd-dimensional backends.
        SpectralCutoffError: If the truncation tail exceeds the tolerance.
    """
    n = spec.torus.dim
    if n % 2:
        raise UnsupportedBackendError("the heat supertrace needs an even-dimensional backend")
    tail = spec.tail(T)
    if tail > tail_tolerance:
        raise SpectralCutoffError(
            f"heat tail {tail:.3g} at T={T} exceeds {tail_tolerance:g}", tail=tail
        )
    weights = spec.chirality * spec.multiplicities
    value = float(np.dot(weights, np.exp(-T * spec.eigenvalues**2 / 2)))
    if dictionary:
        return integral_from_index(value, n)
    return value


def heat_trace(spec: SpectralDirac, T: float) -> float:
    return float(np.dot(spec.multiplicities, np.exp(-T * spec.eigenvalues**2 / 2)))


# ---------------------------------------------------------------------------
# Operator products
# ---------------------------------------------------------------------------


def _multiplier_table(
    op: FormField | CliffordElement, n: int
) -> dict[tuple[int, ...], np.ndarray]:
    if isinstance(op, CliffordElement):
        if op.dim != n:
            raise ValueError(f"multiplier over dimension {op.dim} on a {n}-torus")
        return {(0,) * n: op.coeffs.astype(np.complex128)}
    if op.dim != n:
        raise ValueError(f"multiplier over dimension {op.dim} on a {n}-torus")
    return op.frequency_table()


def _shift(modes: np.ndarray, freq: tuple[int, ...], cutoff: int) -> scipy.sparse.csr_matrix:
    """Sparse map e_k -> e_{k+f} on the cutoff box, dropping modes that leave it."""
    size = 2 * cutoff + 1
    target = modes + np.array(freq, dtype=np.int64)
    inside = np.all(np.abs(target) <= cutoff, axis=1)
    cols = np.nonzero(inside)[0]
    rows = np.ravel_multi_index(tuple((target[inside] + cutoff).T), (size,) * modes.shape[1])
    return scipy.sparse.csr_matrix(
        (np.ones(len(cols)), (rows, cols)), shape=(len(modes), len(modes))
    )


def op_product_supertrace(
    torus: FlatTorus,
    ops: Sequence[tuple[float, FormField | CliffordElement]],
    T: float,
    cutoff: int = 24,
    bundle: TwistBundle | None = None,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> complex:
    """Str(e^{-T(1-tau_M)H} c(f_M) ... c(f_1) e^{-T tau_1 H}) in the truncated Fourier basis.

    H = D^2/2 acts on L^2 (x) Cl_n by Fourier multipliers; each c(f) is left
    Clifford multiplication by a trig-polynomial form field. The real
    supertrace is 2^{n/2} times the summed top coefficients of the diagonal
    blocks.

    Raises:
        GridError: If the times are not ordered in [0, 1].
        SpectralCutoffError: If the truncation tail exceeds the tolerance.
        UnsupportedBackendError: For twists with flux.
    """
    n = torus.dim
    times = [tau for tau, _ in ops]
    if any(t < 0 or t > 1 for t in times) or any(a > b for a, b in itertools.pairwise(times)):
        raise GridError(f"operator times {times} must be ordered in [0, 1]")
    superdim = 1
    if bundle is not None:
        if np.any(bundle.fluxes):
            raise UnsupportedBackendError("operator products are available for flat twists only")
        superdim = bundle.superdimension()
    tables = [_multiplier_table(op, n) for _, op in ops]
    reach = sum(max((max(map(abs, f), default=0) for f in t), default=0) for t in tables)
    tail = (1 << n) * fourier_tail(torus, T, cutoff, reach)
    if tail > tail_tolerance:
        raise SpectralCutoffError(
            f"operator-product tail {tail:.3g} exceeds {tail_tolerance:g}", tail=tail
        )
    modes = torus.lattice_box(cutoff)
    size = 1 << n
    energies = mode_energies(torus, modes)
    eye = scipy.sparse.identity(size, format="csr")

    def heat(dt: float) -> scipy.sparse.csr_matrix:
        return scipy.sparse.kron(scipy.sparse.diags(np.exp(-T * dt * energies)), eye, format="csr")

    product = heat(times[0] if times else 1.0)
    for j, table in enumerate(tables):
        op = None
        for freq, coeffs in table.items():
            term = scipy.sparse.kron(_shift(modes, freq, cutoff), left_matrix_arrays(coeffs, n))
            op = term if op is None else op + term
        product = op.tocsr() @ product
        upper = times[j + 1] if j + 1 < len(times) else 1.0
        product = heat(upper - times[j]) @ product
    base = np.arange(len(modes)) * size
    diag_top = np.asarray(product[base + size - 1, base]).ravel()
    value = 2.0 ** (n / 2) * complex(diag_top.sum())
    return value * superdim


# ---------------------------------------------------------------------------
# Landau multiplicity check
# ---------------------------------------------------------------------------


def magnetic_laplacian(torus: FlatTorus, k: int, grid: int = 24) -> scipy.sparse.csr_matrix:
    """Peierls discretization of -(d - iA)^2 for the flux-k line on a rectangular 2-torus.

    Landau gauge: y-hops at column i carry exp(2 pi i phi i), the x-wrap at row
    j carries exp(-2 pi i phi N j), phi = k / N^2 flux quanta per plaquette.
    """
    lat = torus.lattice
    if torus.dim != 2 or not np.allclose(lat, np.diag(np.diag(lat))):
        raise UnsupportedBackendError("the Peierls check needs a rectangular 2-torus")
    N = grid
    hx, hy = lat[0, 0] / N, lat[1, 1] / N
    phi = k / N**2
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    site = (i * N + j).ravel()
    right = (((i + 1) % N) * N + j).ravel()
    up = (i * N + (j + 1) % N).ravel()
    x_phase = np.where(i == N - 1, np.exp(-2j * np.pi * phi * N * j), 1.0).ravel()
    y_phase = np.exp(2j * np.pi * phi * i).ravel()
    size = N * N
    hop_x = scipy.sparse.csr_matrix((x_phase, (site, right)), shape=(size, size))
    hop_y = scipy.sparse.csr_matrix((y_phase, (site, up)), shape=(size, size))
    diag = scipy.sparse.identity(size) * (2 / hx**2 + 2 / hy**2)
    return (diag - (hop_x + hop_x.conj().T) / hx**2 - (hop_y + hop_y.conj().T) / hy**2).tocsr()


def magnetic_ground_multiplicity(torus: FlatTorus, k: int, grid: int = 24) -> int:
    """Eigenvalues of the Peierls Laplacian below 2|B|; the lowest Landau level has |k|."""
    b = 2 * math.pi * abs(k) / torus.volume
    eig = np.linalg.eigvalsh(magnetic_laplacian(torus, k, grid).toarray())
    return int((eig < 2 * b).sum())


# ---------------------------------------------------------------------------
# Spectral flow
# ---------------------------------------------------------------------------


def _half_sign_sum(values: np.ndarray, atol: float) -> float:
    signs = np.where(np.abs(values) < atol, 0.0, np.sign(values))
    return float(signs.sum())


def _flow_on_grid(g: GaugeMap, steps: int, cutoff: int, atol: float) -> float:
    grid = np.linspace(0.0, 1.0, steps + 1)
    flow = 0.0
    prev = np.sort(circle_family_spectrum(g, 0.0, cutoff).ravel())
    for s in grid[1:]:
        cur = np.sort(circle_family_spectrum(g, s, cutoff).ravel())
        motion = float(np.abs(cur - prev).max())
        near = np.unique(np.round(prev[np.abs(prev) <= 2 * motion + atol], 12))
        crossing = np.any(np.sign(np.round(prev, 12)) != np.sign(np.round(cur, 12)))
        if crossing and len(near) > 1:
            gap = float(np.diff(near).min())
            if motion >= gap / 2:
                raise TrackingAmbiguityError(
                    f"eigenvalues move {motion:.3g} per step near a gap of {gap:.3g}",
                    s=float(s),
                    gap=gap,
                )
        flow += (_half_sign_sum(cur, atol) - _half_sign_sum(prev, atol)) / 2
        prev = cur
    return flow


def spectral_flow(
    g: GaugeMap,
    steps: int = 64,
    cutoff: int = 24,
    max_doublings: int = 6,
    atol: float = 1e-9,
) -> int:
    """Signed zero crossings of D_s, s in [0, 1], by sorted-eigenvalue tracking.

    Zero eigenvalues at grid points count half. The step count doubles when
    eigenvalues move more than half the local gap during a crossing.

    Raises:
        UnsupportedBackendError: Off the circle.
        TrackingAmbiguityError: If doubling ``max_doublings`` times does not help.
    """
    if g.base.dim != 1:
        raise UnsupportedBackendError("spectral flow is implemented on the circle")
    attempt = steps
    last = TrackingAmbiguityError("no tracking attempted")
    for _ in range(max_doublings + 1):
        try:
            flow = _flow_on_grid(g, attempt, cutoff, atol)
        except TrackingAmbiguityError as exc:
            logger.debug("tracking ambiguous with %d steps: %s", attempt, exc)
            last = exc
            attempt *= 2
            continue
        if abs(flow - round(flow)) > 1e-9:
            raise TrackingAmbiguityError(f"non-integral flow {flow}")
        return int(round(flow))
    raise TrackingAmbiguityError(
        f"tracking still ambiguous after {max_doublings} doublings ({attempt // 2} steps)",
        s=last.s,
        gap=last.gap,
    )


def getzler_flow_integral(
    g: GaugeMap,
    T: float,
    nodes: int = 64,
    cutoff: int = 24,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> float:
    """sqrt(T / 2 pi) int_0^1 Tr(c(omega) e^{-T D_s^2 / 2}) ds by Gauss-Legendre in s."""
    reach = max((abs(m) for m in g.windings), default=0) + 1
    tail = g.rank * fourier_tail(g.base, T, cutoff, reach) * 2 * math.pi * reach / g.length
    if tail > tail_tolerance:
        raise SpectralCutoffError(
            f"flow-integral tail {tail:.3g} exceeds {tail_tolerance:g}", tail=tail
        )
    x, w = scipy.special.roots_legendre(nodes)
    s_nodes = (x + 1) / 2
    dot = 2 * np.pi * np.array(g.windings, dtype=float) / g.length
    total = 0.0
    for s, weight in zip(s_nodes, w / 2, strict=True):
        lam = circle_family_spectrum(g, s, cutoff)
        total += weight * float((dot[:, None] * np.exp(-T * lam**2 / 2)).sum())
    return math.sqrt(T / (2 * math.pi)) * total


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def zeta_det_toy(alpha: float) -> tuple[float, float]:
    """Both sides of det_zeta(d/dt with holonomy alpha) = -(str_C of the spin lift)^2 on n = 2.

    Raises:
        ValueError: Unless 0 < alpha < 2 pi.
    """
    if not 0 < alpha < 2 * math.pi:
        raise ValueError(f"alpha must lie in (0, 2 pi), got {alpha}")
    lhs = 4 * math.sin(alpha / 2) ** 2
    lift = CliffordElement(2, [math.cos(alpha / 2), 0, 0, math.sin(alpha / 2)])
    rhs = -(complex_trace(lift) ** 2)
    return lhs, float(rhs.real)


def weyl_count(spec: SpectralDirac, lam: float) -> tuple[int, float]:
    """Eigenvalues with |lambda| <= lam against the leading Weyl term."""
    count = int(spec.multiplicities[np.abs(spec.eigenvalues) <= lam].sum())
    n = spec.torus.dim
    ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    rank = 1 if spec.twist is None else spec.twist.rank
    leading = rank * spinor_rank(n) * ball * spec.torus.volume * lam**n / (2 * math.pi) ** n
    return count, leading


def eigen_dump_rows(
    spectra: Iterable[tuple[float, SpectralDirac]], window: float | None = None
) -> list[dict]:
    """CSV rows (s, index, eigenvalue, chirality, multiplicity) sorted per s."""
    rows: list[dict] = []
    for s, spec in spectra:
        order = np.argsort(spec.eigenvalues, kind="stable")
        index = 0
        for i in order:
            lam = float(spec.eigenvalues[i])
            if window is not None and abs(lam) > window:
                continue
            rows.append(
                {
                    "s": s,
                    "index": index,
                    "eigenvalue": lam,
                    "chirality": int(spec.chirality[i]),
                    "multiplicity": int(spec.multiplicities[i]),
                }
            )
            index += 1
    return rows
