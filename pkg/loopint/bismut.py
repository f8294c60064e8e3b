"""Even and odd Bismut-Chern characters evaluated on loops.

The even character of a twist bundle is evaluated in Feynman-Kac form:
q(BCh_T) on a loop is the supertrace on spinors (x) V of the path-ordered
exponential with potential c(F)/2. The truncated simplex series is a
cross-check with an analytic tail.

The odd character of a gauge map g on the circle is evaluated as an
s-integral over the connections d + s omega, omega = g^{-1} dg, with one
c(omega) insertion summed over its time. On the circle F_s = -s(1-s) omega^2
vanishes, so only the lowest order survives.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from loopint.bundles import (
    GaugeMap,
    PotentialSpec,
    TwistBundle,
    curvature_clifford,
    loop_holonomy_phases,
    path_ordered_exponential,
    path_ordered_series,
)
from loopint.clifford import supertrace_arrays
from loopint.errors import UnsupportedBackendError
from loopint.geometry import DiscreteLoop, closing_signs
from loopint.integrator import MCSettings, curvature_weight
from loopint.wiener import Estimate, WienerSampler, mc_expect

logger = logging.getLogger(__name__)

DEFAULT_S_NODES = 64

# ---------------------------------------------------------------------------
# Even character
# ---------------------------------------------------------------------------


def curvature_potential(bundle: TwistBundle) -> PotentialSpec:
    """The constant potential c(F)/2 on Cl_n (x) C^r."""
    return PotentialSpec(constant=0.5 * curvature_clifford(bundle))


def batch_supertrace(matrices: np.ndarray, n: int, parities: tuple[int, ...]) -> np.ndarray:
    """Supertrace on Cl_n (x) End(V) of Clifford-linear matrices (b, D, D)."""
    r = len(parities)
    size = 1 << n
    blocks = matrices.reshape(-1, size, r, size, r)
    grading = np.array([(-1) ** p for p in parities], dtype=float)
    element = np.einsum("baii,i->ba", blocks[:, :, :, 0, :], grading)
    return supertrace_arrays(element, n)


def bch_even_q(
    loop: DiscreteLoop,
    bundle: TwistBundle,
    T: float,
    substeps: int = 8,
    splitting: str = "strang",
) -> np.ndarray:
    """q(BCh_T(V)) for each loop: str_{Sigma (x) V} of the Feynman-Kac transport, (b,)."""
    u = path_ordered_exponential(loop, T, bundle, curvature_potential(bundle), substeps, splitting)
    return batch_supertrace(u, loop.torus.dim, bundle.parities)


@dataclass
class BChEvenSeries:
    """Per-order supertraces of the truncated simplex series and its tail bound."""

    bundle: TwistBundle
    n_max: int
    orders: np.ndarray  # (b, n_max + 1)
    tail: float

    @property
    def value(self) -> np.ndarray:
        return self.orders.sum(axis=1)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.orders, axis=1)


def bch_even_series(
    loop: DiscreteLoop,
    bundle: TwistBundle,
    T: float,
    n_max: int = 6,
    nodes: int = 24,
) -> BChEvenSeries:
    """Truncated series sum_N (-T/2)^N int_{simplex} str([||] c(F) ... c(F) [||])."""
    sums, tail = path_ordered_series(loop, T, n_max, bundle, curvature_potential(bundle), nodes)
    n = loop.torus.dim
    strs = np.stack(
        [batch_supertrace(sums[:, j], n, bundle.parities) for j in range(n_max + 1)], axis=1
    )
    orders = np.diff(strs, axis=1, prepend=0)
    return BChEvenSeries(bundle, n_max, orders, tail)


def integrate_bch_even(
    bundle: TwistBundle,
    T: float,
    settings: MCSettings = MCSettings(),
    scal: float | None = None,
    substeps: int = 8,
) -> Estimate:
    """Monte Carlo I_T[BCh_T(V)], to be compared with i^{n/2} ind(D_V)."""
    torus = bundle.base
    weight = curvature_weight(T, torus.scalar_curvature if scal is None else scal)

    def integrand(loop: DiscreteLoop) -> np.ndarray:
        return weight * bch_even_q(loop, bundle, T, substeps, settings.splitting)

    sampler = WienerSampler(torus, T, settings.grid, settings.seed)
    return mc_expect(
        sampler,
        integrand,
        settings.n_samples,
        settings.seed,
        chunk_size=settings.chunk_size,
        workers=settings.workers,
        clip=settings.clip,
    )


# ---------------------------------------------------------------------------
# Odd character
# ---------------------------------------------------------------------------


def beta_weights(n_max: int) -> np.ndarray:
    """int_0^1 s^N (1-s)^N ds = (N!)^2 / (2N+1)! for N = 0..n_max."""
    return np.array(
        [math.factorial(k) ** 2 / math.factorial(2 * k + 1) for k in range(n_max + 1)]
    )


def s_quadrature(nodes: int = DEFAULT_S_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = scipy.special.roots_legendre(nodes)
    return (x + 1) / 2, w / 2


def beta_quadrature(n_max: int, nodes: int = DEFAULT_S_NODES) -> np.ndarray:
    s, w = s_quadrature(nodes)
    return np.array([float(np.dot(w, (s * (1 - s)) ** k)) for k in range(n_max + 1)])


@dataclass(frozen=True, eq=False)
class BChOdd:
    """Evaluator of q(BCh_T(g)) for a gauge map on the circle."""

    g: GaugeMap
    s_nodes: int = DEFAULT_S_NODES
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.g.base.dim % 2 == 0:
            raise UnsupportedBackendError("the odd character needs an odd-dimensional base")

    def q(self, loop: DiscreteLoop) -> np.ndarray:
        """(1/sqrt 2) int ds int dtau str(U_s(1,tau) c(omega) U_s(tau,0)), (b,).

        Computed in the frame diagonalizing g, where omega and all transports
        are diagonal; str_{Cl_1}(e_1) = sqrt 2 cancels the prefactor.
        """
        g = self.g
        omega = g.omega_diagonal()  # (r,)
        disp = loop.segment_displacements()[:, :, 0]  # (b, m)
        dt = np.diff(np.append(loop.times, 1.0))
        running = np.cumsum(disp, axis=1)
        before = np.concatenate([np.zeros((loop.batch, 1)), running[:, :-1]], axis=1)
        total = disp.sum(axis=1)
        s_vals, s_w = s_quadrature(self.s_nodes)
        out = np.zeros(loop.batch, dtype=np.complex128)
        for s, ws in zip(s_vals, s_w, strict=True):
            # U_s(1, tau_j) omega U_s(tau_j, 0), summed over insertion nodes
            first = np.exp(-s * before[:, :, None] * omega)
            last = np.exp(-s * (total[:, None] - before)[:, :, None] * omega)
            inserted = (last * omega * first).sum(axis=-1)  # (b, m)
            out += ws * (inserted * dt).sum(axis=1)
        return closing_signs(loop.torus, loop) * out


def bch_odd_q(
    loop: DiscreteLoop, g: GaugeMap, T: float, s_nodes: int = DEFAULT_S_NODES
) -> np.ndarray:
    """q(BCh_T(g)) for each loop; independent of T on the circle."""
    return BChOdd(g, s_nodes).q(loop)


def bch_odd_closed_form(loop: DiscreteLoop, g: GaugeMap) -> np.ndarray:
    """Spin sign * tr(omega) on loops of zero winding; zero otherwise."""
    zero = loop.winding[:, 0] == 0
    return np.where(zero, closing_signs(loop.torus, loop) * g.omega_diagonal().sum(), 0.0)


def integrate_bch_odd(
    g: GaugeMap,
    T: float,
    settings: MCSettings = MCSettings(),
    s_nodes: int = DEFAULT_S_NODES,
) -> Estimate:
    """Monte Carlo I_T[BCh_T(g)], to be compared with i (2 pi / T)^{1/2} sf."""
    evaluator = BChOdd(g, s_nodes)
    torus = g.base
    weight = curvature_weight(T, torus.scalar_curvature)

    def integrand(loop: DiscreteLoop) -> np.ndarray:
        return weight * evaluator.q(loop)

    sampler = WienerSampler(torus, T, settings.grid, settings.seed)
    return mc_expect(
        sampler,
        integrand,
        settings.n_samples,
        settings.seed,
        chunk_size=settings.chunk_size,
        workers=settings.workers,
        clip=settings.clip,
    )


# ---------------------------------------------------------------------------
# Equivariance at lowest order
# ---------------------------------------------------------------------------


def tangent_field(loop: DiscreteLoop) -> np.ndarray:
    """Central-difference velocity at the nodes of a uniform loop, (b, m, n)."""
    disp = loop.segment_displacements()
    m = loop.m
    return (disp + np.roll(disp, 1, axis=1)) * m / 2


def bch_one(loop: DiscreteLoop, bundle: TwistBundle, v: np.ndarray) -> np.ndarray:
    """int_0^1 str_V(P(1,t) F(gamma'(t), v(t)) P(t,0)) dt on polygons, (b,).

    This is -iota_{gamma'} BCh_1 paired with v. Exact for polygons with v
    interpolated linearly between nodes.
    """
    torus = bundle.base
    v = np.broadcast_to(v, loop.lifts.shape)
    if torus.dim != 2 or not np.any(bundle.fluxes):
        return np.zeros(loop.batch, dtype=np.complex128)
    du = torus.to_unit(loop.segment_displacements())
    vu = torus.to_unit(v)
    v_mean = (vu + np.roll(vu, -1, axis=1)) / 2
    cross = (du[..., 0] * v_mean[..., 1] - du[..., 1] * v_mean[..., 0]).sum(axis=1)  # (b,)
    phases = loop_holonomy_phases(bundle, loop)  # (b, r)
    curv = 2j * np.pi * bundle.fluxes  # F_u12 per summand
    return (phases * curv * bundle.grading).sum(axis=1) * cross


@dataclass
class EquivarianceResidual:
    """Finite-difference d str_V(hol)[v] against the contracted first-order character."""

    epsilons: list[float]
    defects: list[float]
    rhs: np.ndarray
    lhs: list[np.ndarray]

    @property
    def ratios(self) -> list[float]:
        return [
            a / b if b > 0 else math.nan
            for a, b in zip(self.defects, self.defects[1:], strict=False)
        ]

    def to_dict(self) -> dict:
        return {"epsilons": self.epsilons, "defects": self.defects, "ratios": self.ratios}


def _perturbed(loop: DiscreteLoop, v: np.ndarray, eps: float) -> DiscreteLoop:
    return DiscreteLoop(loop.torus, loop.times, loop.lifts + eps * v, loop.winding, loop.ties)


def equivariance_residual(
    bundle: TwistBundle,
    loop: DiscreteLoop,
    v: np.ndarray,
    eps: float = 1e-3,
    halvings: int = 3,
) -> EquivarianceResidual:
    """Defects |(str hol(gamma + eps v) - str hol(gamma)) / eps - rhs| for halving eps.

    Forward differences make the defect O(eps), so consecutive ratios tend to 2.
    """
    v = np.broadcast_to(np.asarray(v, dtype=float), loop.lifts.shape)
    base = (loop_holonomy_phases(bundle, loop) * bundle.grading).sum(axis=1)
    rhs = bch_one(loop, bundle, v)
    epsilons: list[float] = []
    defects: list[float] = []
    lhs: list[np.ndarray] = []
    for j in range(halvings + 1):
        e = eps / 2**j
        moved = (loop_holonomy_phases(bundle, _perturbed(loop, v, e)) * bundle.grading).sum(axis=1)
        diff = (moved - base) / e
        epsilons.append(e)
        lhs.append(diff)
        defects.append(float(np.abs(diff - rhs).max()))
    logger.debug("equivariance defects %s", defects)
    return EquivarianceResidual(epsilons, defects, rhs, lhs)
