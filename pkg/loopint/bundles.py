"""Twist bundles and gauge maps on flat tori.

Flux line bundles on T^2 use the gauge A = 2 pi i k u_1 du_2 on the universal
cover, so the curvature is F = 2 pi i k du_1 ^ du_2 (F_12 = iB with
B = 2 pi k / vol). Holonomies are computed along lifts; a closed loop picks up
the transition phase of its closing lattice vector. Rank-r bundles are direct
sums of flux lines, each with a super parity, optionally seen through a
constant unitary frame.

Operators on spinors (x) V act on Cl_n (x) C^r with the Clifford index outer.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from loopint.clifford import (
    CliffordElement,
    exterior_product_arrays,
    left_matrix,
    mask_of,
)
from loopint.errors import BudgetExceededError, GridError, UnsupportedBackendError
from loopint.fields import TrigPolynomial
from loopint.geometry import DiscreteLoop, DiscretePath, FlatTorus

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxLine:
    """One line summand: integer flux and super parity."""

    flux: int = 0
    parity: int = 0


@dataclass(frozen=True, eq=False)
class TwistBundle:
    """Direct sum of flux line bundles over a flat torus."""

    base: FlatTorus
    summands: tuple[FluxLine, ...] = (FluxLine(),)
    frame: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.summands:
            raise ValueError("a bundle needs at least one summand")
        if any(s.flux for s in self.summands) and self.base.dim != 2:
            raise UnsupportedBackendError("non-zero flux is only available on 2-tori")
        if self.frame is not None:
            frame = np.asarray(self.frame, dtype=np.complex128)
            if frame.shape != (self.rank, self.rank) or not np.allclose(
                frame.conj().T @ frame, np.eye(self.rank), atol=1e-12
            ):
                raise ValueError("frame must be a unitary rank x rank matrix")
            object.__setattr__(self, "frame", frame)

    # -- constructors -------------------------------------------------------

    @classmethod
    def trivial(cls, base: FlatTorus, parities: Sequence[int] = (0,)) -> TwistBundle:
        return cls(base, tuple(FluxLine(0, p) for p in parities))

    @classmethod
    def flux_line(cls, base: FlatTorus, k: int, parity: int = 0) -> TwistBundle:
        return cls(base, (FluxLine(k, parity),))

    def direct_sum(self, other: TwistBundle) -> TwistBundle:
        return TwistBundle(self.base, self.summands + other.summands)

    def tensor(self, other: TwistBundle) -> TwistBundle:
        """Tensor product: fluxes add and parities combine mod 2."""
        summands = tuple(
            FluxLine(a.flux + b.flux, (a.parity + b.parity) % 2)
            for a in self.summands
            for b in other.summands
        )
        return TwistBundle(self.base, summands)

    def with_frame(self, frame: np.ndarray) -> TwistBundle:
        return TwistBundle(self.base, self.summands, frame)

    # -- data ---------------------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.summands)

    @property
    def fluxes(self) -> np.ndarray:
        return np.array([s.flux for s in self.summands], dtype=float)

    @property
    def parities(self) -> tuple[int, ...]:
        return tuple(s.parity for s in self.summands)

    @property
    def grading(self) -> np.ndarray:
        return np.array([(-1) ** p for p in self.parities], dtype=float)

    def field_strengths(self) -> np.ndarray:
        """B per summand, F_12 = iB."""
        return 2 * np.pi * self.fluxes / self.base.volume

    def superdimension(self) -> int:
        return int(self.grading.sum())

    def _conjugate(self, diagonal: np.ndarray) -> np.ndarray:
        """Matrices from diagonal entries (..., r), seen through the frame."""
        mats = diagonal[..., :, None] * np.eye(self.rank)
        if self.frame is None:
            return mats
        return self.frame @ mats @ self.frame.conj().T


# ---------------------------------------------------------------------------
# Holonomy
# ---------------------------------------------------------------------------


def segment_phases(bundle: TwistBundle, start: np.ndarray, displacement: np.ndarray) -> np.ndarray:
    """Transport phases exp(-2 pi i k mid_1 du_2) along straight lifted segments, shape (..., r)."""
    torus = bundle.base
    if not np.any(bundle.fluxes):
        return np.ones((*np.shape(start)[:-1], bundle.rank), dtype=np.complex128)
    u0 = torus.to_unit(start)
    du = torus.to_unit(displacement)
    area = (u0[..., 0] + du[..., 0] / 2) * du[..., 1]
    return np.exp(-2j * np.pi * area[..., None] * bundle.fluxes)


def segment_holonomy(
    bundle: TwistBundle, start: np.ndarray, displacement: np.ndarray
) -> np.ndarray:
    """Unitary r x r transport along a straight segment in the fixed gauge."""
    return bundle._conjugate(segment_phases(bundle, start, displacement))


def _closing_phases(bundle: TwistBundle, loop: DiscreteLoop) -> np.ndarray:
    # transition function of the closing lattice vector lambda = (a, b)
    if not np.any(bundle.fluxes):
        return np.ones((loop.batch, bundle.rank), dtype=np.complex128)
    u0 = loop.torus.to_unit(loop.lifts[:, 0])
    a = loop.winding[:, 0].astype(float)
    return np.exp(2j * np.pi * (a * u0[:, 1])[:, None] * bundle.fluxes)


def loop_holonomy_phases(bundle: TwistBundle, loop: DiscreteLoop) -> np.ndarray:
    """Holonomy eigenphases of each loop in the batch, shape (batch, r)."""
    disp = loop.segment_displacements()
    phases = segment_phases(bundle, loop.lifts, disp).prod(axis=1)
    return phases * _closing_phases(bundle, loop)


def loop_holonomy(bundle: TwistBundle, loop: DiscreteLoop) -> np.ndarray:
    """Holonomy matrices (batch, r, r)."""
    return bundle._conjugate(loop_holonomy_phases(bundle, loop))


def path_transport(bundle: TwistBundle, path: DiscretePath) -> np.ndarray:
    """Transport matrices (batch, r, r) from time 0 to time 1 along an open path."""
    phases = segment_phases(bundle, path.lifts[:, :-1], path.displacements()).prod(axis=1)
    return bundle._conjugate(phases)


def holonomy_supertrace(bundle: TwistBundle, loop: DiscreteLoop) -> np.ndarray:
    """str_V of the holonomy, (batch,)."""
    return (loop_holonomy_phases(bundle, loop) * bundle.grading).sum(axis=-1)


def curve_transport(bundle: TwistBundle, curve: DiscreteLoop | DiscretePath) -> np.ndarray:
    """Transport matrices (batch, r, r) along each curve.

    Loops use their holonomy, closing transition included. Open paths use the
    transport in the fixed gauge of the universal cover.
    """
    if isinstance(curve, DiscreteLoop):
        return loop_holonomy(bundle, curve)
    return path_transport(bundle, curve)


# ---------------------------------------------------------------------------
# Curvature and Chern characters
# ---------------------------------------------------------------------------


def curvature_at(bundle: TwistBundle, x: np.ndarray | None = None) -> np.ndarray:
    """Constant curvature F_ij as an array (n, n, r, r)."""
    n = bundle.base.dim
    out = np.zeros((n, n, bundle.rank, bundle.rank), dtype=np.complex128)
    if n == 2:
        f12 = bundle._conjugate(1j * bundle.field_strengths().astype(np.complex128))
        out[0, 1] = f12
        out[1, 0] = -f12
    return out


def curvature_clifford(bundle: TwistBundle) -> np.ndarray:
    """c(F) = sum_{i<j} F_ij e_i e_j as a matrix on Cl_n (x) C^r."""
    n = bundle.base.dim
    curv = curvature_at(bundle)
    size = (1 << n) * bundle.rank
    out = np.zeros((size, size), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            if np.any(curv[i, j]):
                eij = left_matrix(CliffordElement.monomial(n, (i + 1, j + 1)))
                out += np.kron(eij, curv[i, j])
    return out


def _exterior_matrix_product(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    # (r, r, 2^n) x (r, r, 2^n) with exterior products on the last axis
    prod = exterior_product_arrays(a[:, :, None, :], b[None, :, :, :], n)
    return prod.sum(axis=1)


def chern_character_form(bundle: TwistBundle, T: float) -> CliffordElement:
    """str_V(exp(-T F)) as a constant form in the exterior layout (complex coefficients)."""
    n = bundle.base.dim
    r = bundle.rank
    curv = curvature_at(bundle)
    f = np.zeros((r, r, 1 << n), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            f[:, :, mask_of((i + 1, j + 1))] = curv[i, j]
    term = np.zeros((r, r, 1 << n), dtype=np.complex128)
    term[:, :, 0] = np.eye(r)
    total = term.copy()
    for order in range(1, n // 2 + 1):
        term = _exterior_matrix_product(term, -T * f, n) / order
        total += term
    coeffs = np.einsum("iik,i->k", total, bundle.grading)
    return CliffordElement(n, coeffs)


# ---------------------------------------------------------------------------
# Gauge maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeMap:
    """g(x) = U diag(exp(2 pi i m_j x / length)) U^* on a circle."""

    base: FlatTorus
    windings: tuple[int, ...] = (0,)
    frame: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.base.dim != 1:
            raise UnsupportedBackendError("gauge maps are implemented on the circle only")
        object.__setattr__(self, "windings", tuple(int(m) for m in self.windings))
        if self.frame is not None:
            frame = np.asarray(self.frame, dtype=np.complex128)
            if frame.shape != (self.rank, self.rank) or not np.allclose(
                frame.conj().T @ frame, np.eye(self.rank), atol=1e-12
            ):
                raise ValueError("frame must be unitary")
            object.__setattr__(self, "frame", frame)

    @property
    def rank(self) -> int:
        return len(self.windings)

    @property
    def length(self) -> float:
        return float(self.base.lattice[0, 0])

    def _conjugate(self, diagonal: np.ndarray) -> np.ndarray:
        mats = diagonal[..., :, None] * np.eye(self.rank)
        if self.frame is None:
            return mats
        return self.frame @ mats @ self.frame.conj().T

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        return self._conjugate(np.exp(2j * np.pi * np.array(self.windings) * x / self.length))

    def omega_diagonal(self) -> np.ndarray:
        return 2j * np.pi * np.array(self.windings, dtype=float) / self.length

    def omega_matrix(self) -> np.ndarray:
        """The dx-coefficient of omega = g^{-1} dg (constant)."""
        return self._conjugate(self.omega_diagonal())

    def inverse(self) -> GaugeMap:
        return GaugeMap(self.base, tuple(-m for m in self.windings), self.frame)

    def compose(self, other: GaugeMap) -> GaugeMap:
        """Pointwise product of commuting maps sharing a frame."""
        if self.rank != other.rank:
            raise ValueError("rank mismatch")
        same = (self.frame is None and other.frame is None) or (
            self.frame is not None
            and other.frame is not None
            and np.allclose(self.frame, other.frame)
        )
        if not same:
            raise ValueError("only maps diagonal in the same frame can be composed")
        windings = tuple(a + b for a, b in zip(self.windings, other.windings, strict=True))
        return GaugeMap(self.base, windings, self.frame)

    def total_winding(self) -> int:
        return sum(self.windings)


def maurer_cartan(g: GaugeMap, x: float | np.ndarray = 0.0) -> np.ndarray:
    """omega = g^{-1} dg at x (dx-coefficient), anti-hermitian."""
    shape = np.shape(x)
    return np.broadcast_to(g.omega_matrix(), (*shape, g.rank, g.rank)).copy()


def odd_chern_character(g: GaugeMap, T: float) -> CliffordElement:
    """sum_N T^N N!/(2N+1)! tr(omega^{2N+1}) reduced to tr(omega) dx.

    Gauge maps live on the circle, where omega^{2N+1} vanishes for N >= 1, so
    the result does not depend on T.
    """
    return CliffordElement(1, np.array([0.0, np.trace(g.omega_matrix())], dtype=np.complex128))


# ---------------------------------------------------------------------------
# Path-ordered exponentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Hermitian potential V(x) = scalar(u) * 1 + constant on Cl_n (x) C^r."""

    scalar: TrigPolynomial | None = None
    constant: np.ndarray | None = None

    def evaluate(self, torus: FlatTorus, x: np.ndarray, size: int) -> np.ndarray:
        shape = np.shape(x)[:-1]
        out = np.zeros((*shape, size, size), dtype=np.complex128)
        if self.scalar is not None:
            out += self.scalar(torus.to_unit(x))[..., None, None] * np.eye(size)
        if self.constant is not None:
            out += self.constant
        return out

    def norm_bound(self, size: int) -> float:
        bound = self.scalar.bound() if self.scalar is not None else 0.0
        if self.constant is not None:
            bound += float(np.linalg.norm(self.constant, 2))
        return bound


@dataclass
class TransportGrid:
    """Sub-segment transports and potential samples along a loop, in matrix form."""

    transports: np.ndarray  # (b, K, D, D) from sub-node k to k+1, split in halves
    half_first: np.ndarray  # (b, K, D, D)
    half_second: np.ndarray  # (b, K, D, D)
    potentials: np.ndarray  # (b, K, D, D) at sub-segment midpoints
    potentials_nodes: np.ndarray  # (b, K + 1, D, D)
    weights: np.ndarray  # (K,)
    meta: dict = field(default_factory=dict)


def _sub_transport(
    bundle: TwistBundle, start: np.ndarray, disp: np.ndarray, n: int
) -> np.ndarray:
    torus = bundle.base
    us = torus.to_unit(start)
    ue = torus.to_unit(start + disp)
    crossings = np.floor(ue + 1e-12) - np.floor(us + 1e-12)
    exponent = crossings.astype(np.int64) @ np.array(torus.spin_structure, dtype=np.int64)
    sign = np.where(exponent % 2 == 0, 1.0, -1.0)
    vmat = segment_holonomy(bundle, start, disp)
    return sign[..., None, None] * np.kron(np.eye(1 << n), vmat)


def transport_grid(
    loop: DiscreteLoop,
    bundle: TwistBundle,
    potential: PotentialSpec | None,
    substeps: int,
) -> TransportGrid:
    torus = loop.torus
    n = torus.dim
    size = (1 << n) * bundle.rank
    path = loop.as_path()
    frac = np.arange(substeps + 1) / substeps
    dt = np.diff(path.times)
    # sub-node lifts (b, m*substeps + 1, n)
    offsets = path.displacements()[:, :, None, :] * frac[None, None, :-1, None]
    starts = path.lifts[:, :-1, None, :] + offsets
    nodes = np.concatenate([starts.reshape(loop.batch, -1, n), path.lifts[:, -1:]], axis=1)
    weights = np.repeat(dt / substeps, substeps)
    disp = np.diff(nodes, axis=1)
    mids = nodes[:, :-1] + disp / 2
    first = _sub_transport(bundle, nodes[:, :-1], disp / 2, n)
    second = _sub_transport(bundle, mids, disp / 2, n)
    full = second @ first
    if potential is None:
        pots = np.zeros((loop.batch, len(weights), size, size), dtype=np.complex128)
        pots_nodes = np.zeros((loop.batch, len(weights) + 1, size, size), dtype=np.complex128)
    else:
        pots = potential.evaluate(torus, mids, size)
        pots_nodes = potential.evaluate(torus, nodes, size)
    # the closing transition of a flux bundle acts at time 1
    closing = bundle._conjugate(_closing_phases(bundle, loop))
    closing_full = np.kron(np.eye(1 << n), closing)
    return TransportGrid(full, first, second, pots, pots_nodes, weights, {"closing": closing_full})


def path_ordered_exponential(
    loop: DiscreteLoop,
    T: float,
    bundle: TwistBundle | None = None,
    potential: PotentialSpec | None = None,
    substeps: int = 8,
    splitting: str = "strang",
) -> np.ndarray:
    """U_T(1, gamma) on spinors (x) V for each loop in the batch, shape (b, D, D).

    Solves U' = -T V U in the parallel frame with exact segment transports and
    an order-2 splitting ("midpoint" or "strang") per sub-segment.
    """
    bundle = bundle or TwistBundle.trivial(loop.torus)
    grid = transport_grid(loop, bundle, potential, substeps)
    b, k, size, _ = grid.potentials.shape
    u = np.broadcast_to(np.eye(size, dtype=np.complex128), (b, size, size)).copy()
    if splitting == "midpoint":
        steps = scipy.linalg.expm(-T * grid.weights[None, :, None, None] * grid.potentials)
        for j in range(k):
            u = grid.half_second[:, j] @ steps[:, j] @ grid.half_first[:, j] @ u
    elif splitting == "strang":
        half = -T * grid.weights[None, :, None, None] / 2
        left = scipy.linalg.expm(half * grid.potentials_nodes[:, 1:])
        right = scipy.linalg.expm(half * grid.potentials_nodes[:, :-1])
        for j in range(k):
            u = left[:, j] @ grid.transports[:, j] @ right[:, j] @ u
    else:
        raise ValueError(f"unknown splitting {splitting!r}")
    return grid.meta["closing"] @ u


def _series_nodes(loop: DiscreteLoop, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature times (K + 1,) and lifted positions (b, K + 1, n) along each loop."""
    path = loop.as_path()
    n = loop.torus.dim
    frac = np.arange(nodes) / nodes
    dt = np.diff(path.times)
    offsets = path.displacements()[:, :, None, :] * frac[None, None, :, None]
    points = (path.lifts[:, :-1, None, :] + offsets).reshape(loop.batch, -1, n)
    points = np.concatenate([points, path.lifts[:, -1:]], axis=1)
    times = np.append((path.times[:-1, None] + dt[:, None] * frac).ravel(), 1.0)
    return times, points


def _volterra_orders(w: np.ndarray, times: np.ndarray, n_max: int) -> np.ndarray:
    """A_N(1) for A_0 = 1, A_N(s) = int_0^s W(r) A_{N-1}(r) dr; shape (b, n_max + 1, D, D)."""
    a = np.broadcast_to(np.eye(w.shape[-1], dtype=np.complex128), w.shape)
    out = [a[:, -1]]
    for _ in range(n_max):
        a = scipy.integrate.cumulative_trapezoid(w @ a, x=times, axis=1, initial=0)
        out.append(a[:, -1])
    return np.stack(out, axis=1)


def path_ordered_series(
    loop: DiscreteLoop,
    T: float,
    n_max: int,
    bundle: TwistBundle | None = None,
    potential: PotentialSpec | None = None,
    nodes: int = 24,
) -> tuple[np.ndarray, float]:
    """Truncated series sum_{N <= n_max} (-T)^N int_{simplex} [||] V ... V [||] with its tail bound.

    The simplex integrals are taken in the parallel frame, W(s) = [||]^{-1} V [||],
    as nested cumulative trapezoid integrals over ``nodes`` points per loop
    segment, Richardson-extrapolated against every other node. The grid and
    the quadrature are independent of the transport ODE in
    :func:`path_ordered_exponential`.

    Returns:
        (partial sums of shape (b, n_max + 1, D, D) accumulated per order, tail bound).
    """
    if nodes < 2 or nodes % 2:
        raise GridError(f"series nodes per segment must be even and >= 2, got {nodes}")
    bundle = bundle or TwistBundle.trivial(loop.torus)
    torus = loop.torus
    n = torus.dim
    size = (1 << n) * bundle.rank
    times, points = _series_nodes(loop, nodes)

    steps = _sub_transport(bundle, points[:, :-1], np.diff(points, axis=1), n)
    frames = np.empty((loop.batch, len(times), size, size), dtype=np.complex128)
    frames[:, 0] = np.eye(size)
    for j in range(steps.shape[1]):
        frames[:, j + 1] = steps[:, j] @ frames[:, j]

    if potential is None:
        pots = np.zeros_like(frames)
    else:
        pots = potential.evaluate(torus, points, size)
    # transports are unitary
    w = np.conj(np.swapaxes(frames, -1, -2)) @ pots @ frames
    fine = _volterra_orders(w, times, n_max)
    coarse = _volterra_orders(w[:, ::2], times[::2], n_max)
    orders = (4 * fine - coarse) / 3

    closing = np.kron(np.eye(1 << n), bundle._conjugate(_closing_phases(bundle, loop)))
    signs = ((-T) ** np.arange(n_max + 1))[None, :, None, None]
    terms = (closing @ frames[:, -1])[:, None] @ orders * signs

    norms = np.linalg.norm(pots, ord=2, axis=(-2, -1))
    x = T * float(scipy.integrate.trapezoid(norms, times, axis=1).max())
    scale = (1 << n) ** 0.5 * bundle.rank
    tail = scale * x ** (n_max + 1) / math.factorial(n_max + 1) * math.exp(x)
    if not np.isfinite(tail):
        raise BudgetExceededError("series tail bound is not finite", bound=tail)
    return np.cumsum(terms, axis=1), tail
