"""The Dirac density pairing q_rel and q on polygonal loops and paths.

For a block term with factors f_1..f_M the relative density is

    2^{-M+/2} sum_sigma sgn(sigma; l) int_{t_1 < ... < t_M}
        [transport] c(f_{sigma M}(t_M)) ... c(f_{sigma 1}(t_1)) [transport]

with M+ the number of positive-degree factors. Point masses collapse their
integral to a single node; densities are summed on the curve's own grid with
the ordered trapezoid rule, ties between different factors weighted 1/2. On
flat tori spinor transport is a sign, so the transports collapse to the
end-to-end sign of the curve.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from loopint.bundles import TwistBundle, curve_transport, holonomy_supertrace
from loopint.clifford import clifford_product_arrays, super_sign, supertrace_arrays
from loopint.errors import BudgetExceededError, CoincidentTimesError, GridError
from loopint.geometry import (
    DiscreteLoop,
    DiscretePath,
    closing_signs,
    rotate_loop,
    spin_signs,
    uniform_grid,
)
from loopint.loopforms import BlockTerm, Density, IntegralForm, PointMass, rotate

logger = logging.getLogger(__name__)

MAX_FACTORS = 8
TIE_WEIGHT = 0.5

# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass
class _Curve:
    """Node data shared by loops and open paths."""

    curve: DiscreteLoop | DiscretePath
    times: np.ndarray  # density nodes
    lifts: np.ndarray  # (b, k, n)
    weights: np.ndarray  # (k,)
    sign: np.ndarray  # (b,) end-to-end spinor transport

    @classmethod
    def of(cls, curve: DiscreteLoop | DiscretePath) -> _Curve:
        torus = curve.torus
        if isinstance(curve, DiscreteLoop):
            weights = np.diff(np.append(curve.times, 1.0))
            return cls(curve, curve.times, curve.lifts, weights, closing_signs(torus, curve))
        dt = np.diff(curve.times)
        weights = np.zeros(len(curve.times))
        weights[:-1] += dt / 2
        weights[1:] += dt / 2
        return cls(curve, curve.times, curve.lifts, weights, spin_signs(torus, curve, 0.0, 1.0))

    @property
    def batch(self) -> int:
        return self.lifts.shape[0]


def _merged_axis(curve: _Curve, term: BlockTerm) -> tuple[np.ndarray, np.ndarray]:
    """Sorted node times and the merged index of each density node."""
    has_density = any(isinstance(f.profile, Density) for f in term.factors)
    dens = curve.times if has_density else np.zeros(0)
    points = np.array([f.profile.tau for f in term.factors if f.is_point])
    raw = np.sort(np.concatenate([dens, points]))
    axis: list[float] = []
    for t in raw:
        if not axis or t - axis[-1] > 1e-12:
            axis.append(float(t))
    axis_arr = np.array(axis)
    dens_index = np.searchsorted(axis_arr, dens - 1e-12) if has_density else np.zeros(0, int)
    return axis_arr, dens_index


def _amplitudes(curve: _Curve, term: BlockTerm) -> tuple[np.ndarray, np.ndarray]:
    """Clifford amplitudes (M, b, K, 2^n) of every factor on the merged axis."""
    torus = curve.curve.torus
    n = torus.dim
    axis, dens_index = _merged_axis(curve, term)
    out = np.zeros((len(term.factors), curve.batch, len(axis), 1 << n), dtype=np.complex128)
    for j, f in enumerate(term.factors):
        if isinstance(f.profile, PointMass):
            tau = f.profile.tau
            k = int(np.searchsorted(axis, tau - 1e-12))
            u = torus.to_unit(curve.curve.position(tau))
            out[j, :, k] = f.q_weight * f.field.coefficients(u)
        else:
            u = torus.to_unit(curve.lifts)
            scale = f.q_weight * f.profile(curve.times) * curve.weights
            out[j, :, dens_index] += np.moveaxis(
                scale[None, :, None] * f.field.coefficients(u), 1, 0
            )
    return axis, out


def _admissible(term: BlockTerm, sigma: tuple[int, ...]) -> bool:
    taus = [term.factors[s].profile.tau for s in sigma if term.factors[s].is_point]
    return all(a < b for a, b in itertools.pairwise(taus))


def _ordered_sum(amps: np.ndarray, sigma: tuple[int, ...], tie: float, n: int) -> np.ndarray:
    """Sum over ordered node tuples of A_{sigma M} ... A_{sigma 1}, later nodes on the left."""
    g = amps[sigma[0]]
    for s in sigma[1:]:
        below = np.cumsum(g, axis=1) - g
        g = clifford_product_arrays(amps[s], below + tie * g, n)
    return g.sum(axis=1)


def _term_rel(curve: _Curve, term: BlockTerm, tie: float) -> np.ndarray:
    n = curve.curve.torus.dim
    m = len(term.factors)
    out = np.zeros((curve.batch, 1 << n), dtype=np.complex128)
    if m == 0:
        out[:, 0] = 1.0
        return out * term.coeff * curve.sign[:, None]
    if m > MAX_FACTORS:
        raise BudgetExceededError(f"{m} factors exceed the budget of {MAX_FACTORS}", bound=m)
    if term.coincident_pairs():
        raise CoincidentTimesError(
            "point masses share a time; decompose the blocks before evaluating"
        )
    _, amps = _amplitudes(curve, term)
    degrees = term.degrees
    for sigma in itertools.permutations(range(m)):
        if not _admissible(term, sigma):
            continue
        out += super_sign(sigma, degrees) * _ordered_sum(amps, sigma, tie, n)
    prefactor = 2.0 ** (-term.positive_factors / 2)
    return out * (prefactor * term.coeff) * curve.sign[:, None]


def _has_density(theta: IntegralForm) -> bool:
    return any(isinstance(f.profile, Density) for t in theta.terms for f in t.factors)


# ---------------------------------------------------------------------------
# Public evaluation
# ---------------------------------------------------------------------------


@dataclass
class QEvaluation:
    """Values of q or q_rel over a batch, with the tie-weight quadrature defect."""

    value: np.ndarray
    defect: np.ndarray
    meta: dict = field(default_factory=dict)

    def first(self) -> complex | np.ndarray:
        v = self.value[0]
        return complex(v) if np.ndim(v) == 0 else v


def _evaluate_rel(curve: _Curve, theta: IntegralForm) -> tuple[np.ndarray, np.ndarray]:
    n = curve.curve.torus.dim
    if theta.dim != n:
        raise ValueError(f"form over dimension {theta.dim} on a {n}-torus")

    def total(tie: float) -> np.ndarray:
        acc = np.zeros((curve.batch, 1 << n), dtype=np.complex128)
        for term in theta.terms:
            acc += _term_rel(curve, term, tie)
        return acc

    value = total(TIE_WEIGHT)
    if not _has_density(theta):
        return value, np.zeros(curve.batch)
    lo = np.abs(total(0.0) - value).sum(axis=-1)
    hi = np.abs(total(1.0) - value).sum(axis=-1)
    return value, np.maximum(lo, hi)


def q_rel(
    path: DiscretePath | DiscreteLoop,
    theta: IntegralForm,
    bundle: TwistBundle | None = None,
) -> QEvaluation:
    """Relative density as Clifford coefficient vectors (b, 2^n).

    A loop is treated as the path opened at time 0 and includes the closing
    transport. With a twist bundle the density is tensored with the bundle
    transport along the curve, giving shape (b, 2^n, r, r).
    """
    value, defect = _evaluate_rel(_Curve.of(path), theta)
    if bundle is None:
        return QEvaluation(value, defect)
    twist = curve_transport(bundle, path)
    return QEvaluation(value[:, :, None, None] * twist[:, None], defect, {"twist": twist})


def q(loop: DiscreteLoop, theta: IntegralForm) -> QEvaluation:
    """Supertrace of the relative density around each closed loop."""
    rel, defect = _evaluate_rel(_Curve.of(loop), theta)
    n = loop.torus.dim
    scale = 2.0 ** (n / 2)
    return QEvaluation(supertrace_arrays(rel, n), scale * defect)


def q_twisted(loop: DiscreteLoop, theta: IntegralForm, bundle: TwistBundle) -> QEvaluation:
    """q with the supertrace of the bundle holonomy as twist factor."""
    base = q(loop, theta)
    twist = holonomy_supertrace(bundle, loop)
    return QEvaluation(base.value * twist, base.defect * np.abs(twist), {"twist": twist})


def q_values(
    loop: DiscreteLoop, theta: IntegralForm, bundle: TwistBundle | None = None
) -> np.ndarray:
    """Batched q for Monte Carlo integrands."""
    if bundle is None:
        return q(loop, theta).value
    return q_twisted(loop, theta, bundle).value


def q_rotation_check(loop: DiscreteLoop, theta: IntegralForm, t: float) -> np.ndarray:
    """|q_gamma(theta) - q_{t.gamma}(t.theta)| for a grid shift t."""
    m = loop.m
    steps = t * m
    if abs(steps - round(steps)) > 1e-9 or not np.allclose(loop.times, uniform_grid(m)):
        raise GridError(f"rotation by {t} does not map the loop grid to itself")
    if round(steps) % m == 0:
        return np.zeros(loop.batch)
    before = q(loop, theta).value
    after = q(rotate_loop(loop, int(round(steps))), rotate(t, theta)).value
    return np.abs(before - after)
