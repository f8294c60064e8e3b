"""Flat torus and circle backend: lattice geometry, heat kernels, polygon loops.

Points are Euclidean coordinates x in R^n. The lattice matrix L has the
generators as columns and cell coordinates are u = L^{-1} x. Loops and paths
are stored through lifts to the universal cover R^n, batched along a leading
axis so samplers and evaluators can work on many loops at once.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np

from loopint.clifford import CliffordElement
from loopint.errors import DimensionMismatchError, GridError

logger = logging.getLogger(__name__)

# Terms below exp(-_CUTOFF_EXPONENT) relative to the leading one are dropped.
_CUTOFF_EXPONENT = 37.0

# ---------------------------------------------------------------------------
# Torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlatTorus:
    """R^n modulo a lattice, with a spin structure epsilon in {0,1}^n.

    ``spin_structure[i] == 1`` makes the spinor transport around generator i
    equal to -1.
    """

    lattice: np.ndarray
    spin_structure: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        lattice = np.atleast_2d(np.asarray(self.lattice, dtype=float))
        n = lattice.shape[0]
        if lattice.shape != (n, n):
            raise DimensionMismatchError(f"lattice must be square, got {lattice.shape}")
        if abs(np.linalg.det(lattice)) < 1e-12:
            raise ValueError("lattice matrix is singular")
        lattice.setflags(write=False)
        spin = tuple(int(e) % 2 for e in self.spin_structure) or (0,) * n
        if len(spin) != n:
            raise DimensionMismatchError(f"spin structure needs {n} entries, got {len(spin)}")
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "spin_structure", spin)

    @classmethod
    def unit(cls, n: int, spin_structure: tuple[int, ...] = ()) -> FlatTorus:
        return cls(np.eye(n), spin_structure)

    @classmethod
    def circle(cls, length: float = 1.0, spin: int = 0) -> FlatTorus:
        return cls(np.array([[length]]), (spin,))

    @property
    def dim(self) -> int:
        return self.lattice.shape[0]

    @cached_property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.lattice)))

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.lattice)

    @cached_property
    def dual(self) -> np.ndarray:
        """2 pi L^{-T}: maps integer frequencies to wave vectors."""
        return 2 * np.pi * self.inverse.T

    @cached_property
    def geodesic_radius(self) -> int:
        """Max-norm radius of lattice offsets that can hold a shortest translate.

        A reduced offset L r, |r|_inf <= 1/2, is at most half the summed column
        norms long, and so is the shortest translate L(r + m); solving for m
        bounds each |m_i| through the rows of L^{-1}.
        """
        half_diam = 0.5 * float(np.linalg.norm(self.lattice, axis=0).sum())
        rows = np.linalg.norm(self.inverse, axis=1)
        return int(math.ceil(float(rows.max()) * half_diam + 0.5))

    @cached_property
    def shortest_scale(self) -> float:
        """Smallest singular value of L, a lower bound for |L lambda| / |lambda|."""
        return float(np.linalg.svd(self.lattice, compute_uv=False).min())

    @cached_property
    def epsilon(self) -> np.ndarray:
        return np.array(self.spin_structure, dtype=float)

    @property
    def scalar_curvature(self) -> float:
        return 0.0

    def riemann(self) -> np.ndarray:
        """Riemann tensor R_ijkl, identically zero."""
        n = self.dim
        return np.zeros((n, n, n, n))

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.inverse.T

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) @ self.lattice.T

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Representative of x in the fundamental cell [0,1)^n (cell coordinates)."""
        u = self.to_unit(x)
        return self.from_unit(u - np.floor(u))

    def quadrature_grid(self, points_per_axis: int) -> tuple[np.ndarray, float]:
        """Uniform lattice grid (g^n, n) with the equal weight vol/g^n."""
        g = points_per_axis
        axes = [np.arange(g) / g] * self.dim
        u = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return self.from_unit(u), self.volume / g**self.dim

    def lattice_box(self, radius: int) -> np.ndarray:
        """All integer vectors with max-norm <= radius, shape (K, n)."""
        rng = range(-radius, radius + 1)
        return np.array(list(itertools.product(rng, repeat=self.dim)), dtype=np.int64)


# ---------------------------------------------------------------------------
# Heat kernels
# ---------------------------------------------------------------------------


def _direct_radius(torus: FlatTorus, t: float) -> int:
    reach = math.sqrt(2 * _CUTOFF_EXPONENT * t)
    diameter = float(np.linalg.norm(torus.lattice, axis=0).sum())
    return int(math.ceil((reach + diameter) / torus.shortest_scale)) + 1


def _dual_radius(torus: FlatTorus, t: float) -> int:
    dual_scale = float(np.linalg.svd(torus.dual, compute_uv=False).min())
    return int(math.ceil(math.sqrt(2 * _CUTOFF_EXPONENT / t) / dual_scale)) + 1


def heat_kernel(
    torus: FlatTorus, t: float, x: np.ndarray, y: np.ndarray, spin: bool = False
) -> np.ndarray:
    """Wrapped Gaussian p_t(x, y) = sum_lambda (2 pi t)^{-n/2} exp(-|x-y+L lambda|^2 / 2t).

    With ``spin=True`` each winding sector carries the spin-structure sign
    (-1)^{epsilon.lambda}, giving the scalar heat kernel on spinors.
    """
    if t <= 0:
        raise ValueError(f"heat kernel time must be positive, got {t}")
    n = torus.dim
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = torus.to_unit(x - y)
    u = u - np.round(u)
    box = torus.lattice_box(_direct_radius(torus, t))
    shifts = torus.from_unit(u[..., None, :] + box)
    sq = np.einsum("...kn,...kn->...k", shifts, shifts)
    weights = np.exp(-sq / (2 * t))
    if spin:
        signs = np.where((box @ torus.spin_structure) % 2 == 0, 1.0, -1.0)
        # rounding moved the winding origin; fold that shift into the sign
        base = np.round(torus.to_unit(x - y)).astype(np.int64)
        base_sign = np.where((base @ np.array(torus.spin_structure)) % 2 == 0, 1.0, -1.0)
        weights = weights * signs * base_sign[..., None]
    return weights.sum(axis=-1) * (2 * np.pi * t) ** (-n / 2)


def heat_kernel_dual(
    torus: FlatTorus, t: float, x: np.ndarray, y: np.ndarray, spin: bool = False
) -> np.ndarray:
    """Fourier representation (1/vol) sum_k exp(-t|2 pi L^{-T}(k+e/2)|^2/2 + i ...)."""
    if t <= 0:
        raise ValueError(f"heat kernel time must be positive, got {t}")
    box = torus.lattice_box(_dual_radius(torus, t)).astype(float)
    if spin:
        box = box + torus.epsilon / 2
    wave = box @ torus.dual.T
    decay = np.exp(-t * np.einsum("kn,kn->k", wave, wave) / 2)
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    phase = np.exp(1j * (diff @ wave.T))
    return (phase @ decay).real / torus.volume


def heat_kernel_theta_oracle(torus: FlatTorus, t: float, x: np.ndarray, y: np.ndarray) -> float:
    """Product of Jacobi theta functions, valid for diagonal lattices only."""
    if not np.allclose(torus.lattice, np.diag(np.diag(torus.lattice))):
        raise ValueError("theta oracle requires a diagonal lattice")
    value = mpmath.mpf(1)
    for i, length in enumerate(np.diag(torus.lattice)):
        q = mpmath.exp(-2 * mpmath.pi**2 * t / length**2)
        z = mpmath.pi * (float(x[i]) - float(y[i])) / length
        value *= mpmath.jtheta(3, z, q) / length
    return float(value)


def trace_heat(torus: FlatTorus, t: float, spin: bool = False) -> float:
    """Z = Tr(e^{-t H_0}) = sum_k exp(-t|2 pi L^{-T}(k + e/2)|^2 / 2)."""
    box = torus.lattice_box(_dual_radius(torus, t)).astype(float)
    if spin:
        box = box + torus.epsilon / 2
    wave = box @ torus.dual.T
    return float(np.exp(-t * np.einsum("kn,kn->k", wave, wave) / 2).sum())


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------


def geodesic_displacements(
    torus: FlatTorus, x: np.ndarray, y: np.ndarray, rtol: float = 1e-12
) -> tuple[np.ndarray, np.ndarray]:
    """Shortest displacements from x to y over lattice translates of y.

    Ties are broken by the lexicographically smallest lattice vector.

    Returns:
        (displacements of shape (..., n), boolean tie flags of shape (...)).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = torus.to_unit(y - x)
    base = np.round(u)
    box = torus.lattice_box(torus.geodesic_radius)  # lexicographic order
    cand_u = (u - base)[..., None, :] + box
    cand = torus.from_unit(cand_u)
    norms = np.einsum("...kn,...kn->...k", cand, cand)
    best = norms.min(axis=-1, keepdims=True)
    close = norms <= best * (1 + rtol) + rtol**2
    choice = np.argmax(close, axis=-1)
    ties = close.sum(axis=-1) > 1
    disp = np.take_along_axis(cand, choice[..., None, None], axis=-2)[..., 0, :]
    if np.any(ties):
        logger.warning("geodesic tie-break applied to %d segment(s)", int(ties.sum()))
    return disp, ties


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    displacement: np.ndarray
    tie: bool = False

    @property
    def end(self) -> np.ndarray:
        return self.start + self.displacement


def geodesic_segment(torus: FlatTorus, x: np.ndarray, y: np.ndarray) -> Segment:
    """Minimizing straight segment from x towards y in the lift starting at x."""
    disp, tie = geodesic_displacements(torus, np.asarray(x), np.asarray(y))
    return Segment(np.asarray(x, dtype=float), disp, bool(tie))


# ---------------------------------------------------------------------------
# Loops and paths
# ---------------------------------------------------------------------------


def uniform_grid(m: int) -> np.ndarray:
    if m < 1:
        raise GridError(f"grid needs at least one node, got m={m}")
    return np.arange(m) / m


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Batch of polygonal paths with nodes at ``times`` (0 and 1 included).

    ``lifts`` has shape (batch, len(times), n).
    """

    torus: FlatTorus
    times: np.ndarray
    lifts: np.ndarray
    ties: int = 0

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or len(self.times) < 2:
            raise GridError("a path needs at least its two endpoints")
        if np.any(np.diff(self.times) <= 0):
            raise GridError("path times must be strictly increasing")
        if self.lifts.shape[1:] != (len(self.times), self.torus.dim):
            raise DimensionMismatchError(f"lifts have shape {self.lifts.shape}")

    @property
    def batch(self) -> int:
        return self.lifts.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.torus.wrap(self.lifts)

    def position(self, tau: float | np.ndarray) -> np.ndarray:
        """Lifted position at time(s) tau by linear interpolation, shape (batch, ..., n)."""
        tau = np.asarray(tau, dtype=float)
        j = np.clip(np.searchsorted(self.times, tau, side="right") - 1, 0, len(self.times) - 2)
        t0 = self.times[j]
        t1 = self.times[j + 1]
        w = ((tau - t0) / (t1 - t0))[..., None]
        return self.lifts[:, j] * (1 - w) + self.lifts[:, j + 1] * w

    def displacements(self) -> np.ndarray:
        return np.diff(self.lifts, axis=1)

    def close(self) -> DiscreteLoop:
        """View a path whose endpoints agree on the torus as a loop."""
        gap = self.torus.to_unit(self.lifts[:, -1] - self.lifts[:, 0])
        winding = np.round(gap)
        if not np.allclose(gap, winding, atol=1e-9):
            raise GridError("path endpoints differ on the torus")
        return DiscreteLoop(
            self.torus, self.times[:-1], self.lifts[:, :-1], winding.astype(np.int64), self.ties
        )


@dataclass(frozen=True, eq=False)
class DiscreteLoop:
    """Batch of closed polygonal loops on a cyclic grid in [0, 1).

    ``lifts`` has shape (batch, m, n); ``winding`` (batch, n) is the integer
    closing vector so the lift at time 1 is lifts[:, 0] + L winding.
    """

    torus: FlatTorus
    times: np.ndarray
    lifts: np.ndarray
    winding: np.ndarray
    ties: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or len(self.times) < 1:
            raise GridError("a loop needs at least one node")
        if self.times[0] != 0 or self.times[-1] >= 1 or np.any(np.diff(self.times) <= 0):
            raise GridError("loop times must start at 0 and increase strictly inside [0, 1)")
        b, m, n = self.lifts.shape
        if m != len(self.times) or n != self.torus.dim:
            raise DimensionMismatchError(f"lifts have shape {self.lifts.shape}")
        if self.winding.shape != (b, n):
            raise DimensionMismatchError(f"winding has shape {self.winding.shape}")

    @classmethod
    def constant(cls, torus: FlatTorus, x: np.ndarray, m: int = 1) -> DiscreteLoop:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lifts = np.repeat(x[:, None, :], m, axis=1)
        return cls(torus, uniform_grid(m), lifts, np.zeros((len(x), torus.dim), dtype=np.int64))

    @classmethod
    def from_points(
        cls, torus: FlatTorus, points: np.ndarray, times: np.ndarray | None = None
    ) -> DiscreteLoop:
        """Close a single sequence of torus points with minimizing geodesics."""
        points = np.asarray(points, dtype=float)
        m = len(points)
        times = uniform_grid(m) if times is None else np.asarray(times, dtype=float)
        nxt = np.roll(points, -1, axis=0)
        disp, ties = geodesic_displacements(torus, points, nxt)
        lifts = np.concatenate([points[:1], points[:1] + np.cumsum(disp[:-1], axis=0)], axis=0)
        end = lifts[-1] + disp[-1]
        winding = np.round(torus.to_unit(end - points[0])).astype(np.int64)
        return cls(torus, times, lifts[None], winding[None], ties=int(ties.sum()))

    @property
    def batch(self) -> int:
        return self.lifts.shape[0]

    @property
    def m(self) -> int:
        return len(self.times)

    @property
    def points(self) -> np.ndarray:
        return self.torus.wrap(self.lifts)

    def closing_lift(self) -> np.ndarray:
        return self.lifts[:, 0] + self.torus.from_unit(self.winding.astype(float))

    def as_path(self) -> DiscretePath:
        """Open the loop at time 0, appending the closing node at time 1."""
        times = np.append(self.times, 1.0)
        lifts = np.concatenate([self.lifts, self.closing_lift()[:, None, :]], axis=1)
        return DiscretePath(self.torus, times, lifts, self.ties)

    def position(self, tau: float | np.ndarray) -> np.ndarray:
        return self.as_path().position(np.mod(tau, 1.0))

    def segment_displacements(self) -> np.ndarray:
        """(batch, m, n) displacements including the closing segment."""
        nxt = np.concatenate([self.lifts[:, 1:], self.closing_lift()[:, None, :]], axis=1)
        return nxt - self.lifts

    def select(self, index: int | slice | np.ndarray) -> DiscreteLoop:
        idx = np.atleast_1d(np.arange(self.batch)[index])
        return DiscreteLoop(self.torus, self.times, self.lifts[idx], self.winding[idx], self.ties)


# ---------------------------------------------------------------------------
# Spin transport
# ---------------------------------------------------------------------------


def spin_signs(
    torus: FlatTorus, path: DiscretePath | DiscreteLoop, s: float, t: float
) -> np.ndarray:
    """Spinor transport sign prod_i (-1)^{e_i w_i(s, t)} for each path in the batch."""
    if isinstance(path, DiscreteLoop):
        path = path.as_path()
    us = torus.to_unit(path.position(s))
    ut = torus.to_unit(path.position(t))
    crossings = np.floor(ut + 1e-12) - np.floor(us + 1e-12)
    exponent = crossings.astype(np.int64) @ np.array(torus.spin_structure, dtype=np.int64)
    return np.where(exponent % 2 == 0, 1.0, -1.0)


def closing_signs(torus: FlatTorus, loop: DiscreteLoop) -> np.ndarray:
    """Full-period spinor holonomy sign (-1)^{e.winding}."""
    exponent = loop.winding @ np.array(torus.spin_structure, dtype=np.int64)
    return np.where(exponent % 2 == 0, 1.0, -1.0)


def spin_parallel_transport(
    torus: FlatTorus, path: DiscretePath | DiscreteLoop, s: float, t: float
) -> CliffordElement:
    """Transport of the first path in the batch as an element of Cl_n (a signed identity)."""
    sign = float(spin_signs(torus, path, s, t)[0])
    return CliffordElement.scalar(torus.dim, sign)


# ---------------------------------------------------------------------------
# Polygons, rotation, energy
# ---------------------------------------------------------------------------


def _node_indices(times: np.ndarray, partition: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(times, partition - 1e-12)
    idx = np.clip(idx, 0, len(times) - 1)
    if not np.allclose(times[idx], partition, atol=1e-12):
        raise GridError("partition must be a subset of the loop's time grid")
    return idx


def polygonize(loop: DiscreteLoop, partition: np.ndarray) -> DiscreteLoop:
    """Piecewise-geodesic loop through the loop's values at the partition nodes."""
    partition = np.asarray(partition, dtype=float)
    idx = _node_indices(loop.times, partition)
    torus = loop.torus
    pts = loop.lifts[:, idx]
    nxt = np.concatenate([pts[:, 1:], loop.closing_lift()[:, None, :]], axis=1)
    disp, ties = geodesic_displacements(torus, pts, nxt)
    lifts = np.concatenate(
        [pts[:, :1], pts[:, :1] + np.cumsum(disp[:, :-1], axis=1)], axis=1
    )
    end = lifts[:, -1] + disp[:, -1]
    winding = np.round(torus.to_unit(end - lifts[:, 0])).astype(np.int64)
    return DiscreteLoop(torus, partition, lifts, winding, ties=loop.ties + int(ties.sum()))


def coarsen(loop: DiscreteLoop, m: int) -> DiscreteLoop:
    """Polygonize a uniform loop onto the uniform subgrid with m nodes."""
    if loop.m % m:
        raise GridError(f"grid {m} does not divide the loop grid {loop.m}")
    return polygonize(loop, uniform_grid(m))


def rotate_loop(loop: DiscreteLoop, steps: int) -> DiscreteLoop:
    """The loop t.gamma(tau) = gamma(tau + t) for the grid shift t = steps/m."""
    m = loop.m
    if not np.allclose(loop.times, uniform_grid(m)):
        raise GridError("rotation by grid shifts needs a uniform grid")
    k = steps % m
    shift = loop.torus.from_unit(loop.winding.astype(float))[:, None, :]
    extended = np.concatenate([loop.lifts, loop.lifts + shift], axis=1)
    return DiscreteLoop(loop.torus, loop.times, extended[:, k : k + m], loop.winding, loop.ties)


def energy(loop: DiscreteLoop) -> np.ndarray:
    """E = 1/2 int |gamma'|^2, exact per straight segment."""
    disp = loop.segment_displacements()
    dt = np.diff(np.append(loop.times, 1.0 + loop.times[0]))
    return 0.5 * (np.einsum("bmn,bmn->bm", disp, disp) / dt).sum(axis=1)


def canonical_two_form(loop: DiscreteLoop, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """omega[v, w] = int <v, w'> dt for piecewise-linear periodic fields v, w (batch, m, n)."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != loop.lifts.shape or w.shape != loop.lifts.shape:
        raise DimensionMismatchError("vector fields must match the loop's node layout")
    v_mid = (v + np.roll(v, -1, axis=1)) / 2
    dw = np.roll(w, -1, axis=1) - w
    return np.einsum("bmn,bmn->b", v_mid, dw)
