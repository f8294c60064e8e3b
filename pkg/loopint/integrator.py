"""The integral map I_T: Monte Carlo, relative and spectral evaluation.

I_T[theta] = W_T[exp(-(T/8) int scal) q(theta)] is estimated over sampled
polygon loops. The relative map evaluates 2^{n/2} W_T^{xx}[q_rel(theta)] at a
point. The spectral evaluator computes the same number as a sum of heat
supertraces over Fourier chains, exact up to the mode cutoff.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from loopint.bundles import TwistBundle
from loopint.clifford import (
    clifford_product_arrays,
    exterior_product_arrays,
    super_sign,
    supertrace_arrays,
)
from loopint.errors import GridError, SpectralCutoffError, UnsupportedBackendError
from loopint.fields import FormField
from loopint.geometry import DiscreteLoop, FlatTorus, coarsen
from loopint.loopforms import BlockTerm, Density, IntegralForm, average, lift_form, norm
from loopint.qfunctional import q_rel, q_values
from loopint.spectral import fourier_tail, mode_energies
from loopint.wiener import (
    Accumulator,
    BridgeSampler,
    Comparison,
    Estimate,
    WienerSampler,
    chunk_plan,
    mc_expect,
    stream,
)

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCSettings:
    n_samples: int = 20_000
    grid: int = 16
    seed: int = 0
    chunk_size: int = 4096
    workers: int = 1
    clip: float | None = None
    splitting: str = "strang"


@dataclass(frozen=True)
class SpectralSettings:
    cutoff: int = 24
    gauss_nodes: int = 16
    tail_tolerance: float = 1e-10


def curvature_weight(T: float, scal: float) -> float:
    """exp(-(T/8) int_0^1 scal(gamma(t)) dt) for constant scalar curvature."""
    return math.exp(-T * scal / 8)


def form_integrand(
    theta: IntegralForm,
    T: float,
    bundle: TwistBundle | None = None,
    scal: float | None = None,
) -> Callable[[DiscreteLoop], np.ndarray]:
    """The loop functional exp(-(T/8) int scal) q(theta), twisted when a bundle is given."""

    def integrand(loop: DiscreteLoop) -> np.ndarray:
        weight = curvature_weight(T, loop.torus.scalar_curvature if scal is None else scal)
        return weight * q_values(loop, theta, bundle)

    return integrand


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def integrate_mc(
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    settings: MCSettings = MCSettings(),
    bundle: TwistBundle | None = None,
    scal: float | None = None,
) -> Estimate:
    """Monte Carlo estimate of I_T[theta] on polygon loops with ``settings.grid`` nodes.

    Args:
        theta: Integral form to integrate.
        T: Measure parameter.
        torus: Flat backend.
        settings: Sample count, grid, seed and worker layout.
        bundle: Optional twist; q is multiplied by str_V of the holonomy.
        scal: Constant scalar-curvature override for the curvature weight.
    """
    sampler = WienerSampler(torus, T, settings.grid, settings.seed)
    return mc_expect(
        sampler,
        form_integrand(theta, T, bundle, scal),
        settings.n_samples,
        settings.seed,
        chunk_size=settings.chunk_size,
        workers=settings.workers,
        clip=settings.clip,
    )


@dataclass
class RelativeEstimate:
    """Exterior-algebra valued estimate: one Estimate per monomial."""

    x: np.ndarray
    components: list[Estimate]

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.components])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.components])

    def top(self) -> Estimate:
        return self.components[-1]


def integrate_rel_mc(
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    x: np.ndarray,
    settings: MCSettings = MCSettings(),
    scal: float | None = None,
) -> RelativeEstimate:
    """2^{n/2} W_T^{xx}[exp(-(T/8) int scal) c^{-1}(q_rel(theta))] by pinned sampling."""
    n = torus.dim
    sampler = BridgeSampler(torus, T, x, x, settings.grid)
    weight = curvature_weight(T, torus.scalar_curvature if scal is None else scal)
    accs = [Accumulator() for _ in range(1 << n)]
    for chunk, size in chunk_plan(settings.n_samples, settings.chunk_size):
        path = sampler.draw(stream(settings.seed, chunk), size)
        rel = weight * q_rel(path, theta).value
        for i, acc in enumerate(accs):
            acc.add(rel[:, i])
    scale = 2.0 ** (n / 2) * sampler.mass
    return RelativeEstimate(
        np.asarray(x, dtype=float),
        [Estimate.from_accumulator(acc, scale, settings.seed) for acc in accs],
    )


def _quadrature_of_relative(
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    settings: MCSettings,
    grid: int,
    alpha: FormField | None = None,
) -> tuple[complex, float]:
    """Lattice quadrature over x of the top component of (alpha ^) I_T^rel[theta](x)."""
    n = torus.dim
    top = (1 << n) - 1
    points, weight = torus.quadrature_grid(grid)
    total = 0j
    var = 0.0
    for i, x in enumerate(points):
        node_settings = MCSettings(
            max(settings.n_samples // len(points), 64),
            settings.grid,
            settings.seed + 1 + i,
            settings.chunk_size,
        )
        rel = integrate_rel_mc(theta, T, torus, x, node_settings)
        values, errs = rel.values, rel.stderrs
        if alpha is not None:
            a = alpha.coefficients(torus.to_unit(x))
            values = exterior_product_arrays(a, values, n)
            # each output coefficient is a signed sum of products a_I * v_J
            errs = np.sqrt(exterior_product_arrays(np.abs(a) ** 2, errs**2, n).real)
        total += weight * values[top]
        var += (weight * float(np.abs(errs[top]))) ** 2
    return total, math.sqrt(var)


def relative_map_check(
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    settings: MCSettings = MCSettings(),
    grid: int = 4,
) -> Comparison:
    """int_X I_T^rel[theta] (top degree) against I_T[theta]."""
    lhs, lhs_err = _quadrature_of_relative(theta, T, torus, settings, grid)
    rhs = integrate_mc(theta, T, torus, settings)
    stderr = math.sqrt(lhs_err**2 + rhs.stderr**2)
    return Comparison("relative vs absolute", lhs, rhs.value, stderr, {"grid": grid})


def fiber_integration_check(
    alpha: FormField,
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    settings: MCSettings = MCSettings(),
    grid: int = 4,
    rotations: int = 4,
) -> Comparison:
    """I_T(P alpha ^ theta) against (1/sqrt 2) int_X alpha ^ I_T^rel(Av theta)."""
    if alpha.degree < 1:
        raise ValueError("fibre integration needs a form of positive degree")
    lifted = lift_form(Density.constant(), alpha)
    if lifted.is_zero():
        return Comparison("fibre integration", 0.0, 0.0, 0.0)
    lhs = integrate_mc(lifted ^ theta, T, torus, settings)
    rhs, rhs_err = _quadrature_of_relative(
        average(theta, rotations), T, torus, settings, grid, alpha
    )
    rhs /= math.sqrt(2)
    rhs_err /= math.sqrt(2)
    stderr = math.sqrt(lhs.stderr**2 + rhs_err**2)
    return Comparison("fibre integration", lhs.value, rhs, stderr, {"grid": grid})


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------


@dataclass
class RefinementSweep:
    """Per-grid estimates on shared Brownian samples; the finest grid is reported."""

    grids: list[int]
    estimates: list[Estimate]
    differences: list[float] = field(default_factory=list)
    slope: float = math.nan
    extrapolated: complex = 0j

    @property
    def value(self) -> complex:
        return self.estimates[-1].value

    @property
    def defect(self) -> float:
        return self.differences[-1] if self.differences else 0.0

    def to_dict(self) -> dict:
        return {
            "grids": self.grids,
            "estimates": [e.to_dict() for e in self.estimates],
            "differences": self.differences,
            "slope": self.slope,
            "extrapolated": self.extrapolated,
            "value": self.value,
        }


def refinement_sweep(
    integrand: Callable[[DiscreteLoop], np.ndarray],
    T: float,
    torus: FlatTorus,
    grids: Sequence[int],
    settings: MCSettings = MCSettings(),
) -> RefinementSweep:
    """Evaluate one integrand on polygonizations of the same fine-grid loops.

    Every grid must divide the finest one, so coarse loops are polygons
    through nodes of the fine samples.
    """
    grids = sorted(set(grids))
    if len(grids) < 2:
        raise GridError("a refinement sweep needs at least two grids")
    finest = grids[-1]
    if any(finest % m for m in grids):
        raise GridError(f"grids {grids} must all divide the finest grid {finest}")
    sampler = WienerSampler(torus, T, finest, settings.seed)

    def work(job: tuple[int, int]) -> list[Accumulator]:
        chunk, size = job
        loops = sampler.draw(stream(settings.seed, chunk), size)
        out = []
        for m in grids:
            acc = Accumulator()
            acc.add(integrand(loops if m == finest else coarsen(loops, m)))
            out.append(acc)
        return out

    jobs = chunk_plan(settings.n_samples, settings.chunk_size)
    if settings.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    accs = [Accumulator() for _ in grids]
    for part in parts:
        accs = [a.merge(b) for a, b in zip(accs, part, strict=True)]
    estimates = [Estimate.from_accumulator(a, sampler.mass, settings.seed) for a in accs]
    values = [e.value for e in estimates]
    diffs = [abs(b - a) for a, b in itertools.pairwise(values)]
    slope = math.nan
    positive = [(m, d) for m, d in zip(grids[1:], diffs, strict=True) if d > 0]
    if len(positive) >= 2:
        ms, ds = zip(*positive, strict=True)
        slope = float(np.polyfit(np.log(ms), np.log(ds), 1)[0])
    m1, m2 = grids[-2], grids[-1]
    extrapolated = (m2 * values[-1] - m1 * values[-2]) / (m2 - m1)
    logger.debug("refinement sweep over %s: differences %s", grids, diffs)
    return RefinementSweep(list(grids), estimates, diffs, slope, extrapolated)


# ---------------------------------------------------------------------------
# Spectral evaluation
# ---------------------------------------------------------------------------


def _ordered_nodes(a: float, b: float, d: int, g: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical Gauss-Legendre rule for a <= t_1 <= ... <= t_d <= b."""
    if d == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = scipy.special.roots_legendre(g)
    v = (x + 1) / 2
    wv = w / 2
    grids = np.array(list(itertools.product(range(g), repeat=d)))
    vs = v[grids]
    weights = np.prod(wv[grids], axis=1) * (b - a) ** d
    times = np.empty_like(vs)
    span = np.full(len(vs), b - a)
    for j in range(d - 1, -1, -1):
        times[:, j] = a + span * vs[:, j]
        if j > 0:
            weights = weights * vs[:, j] ** j
        span = times[:, j] - a
    return times, weights


def _slot_quadrature(
    term: BlockTerm, sigma: tuple[int, ...], g: int
) -> tuple[np.ndarray, np.ndarray]:
    """Slot times (Q, M) and weights (Q,) for the factors placed by sigma."""
    m = len(sigma)
    fixed = [
        (j, term.factors[s].profile.tau) for j, s in enumerate(sigma) if term.factors[s].is_point
    ]
    edges = [(-1, 0.0), *fixed, (m, 1.0)]
    pieces = []
    for (j0, a), (j1, b) in itertools.pairwise(edges):
        pieces.append((list(range(j0 + 1, j1)), *_ordered_nodes(a, b, j1 - j0 - 1, g)))
    times = np.zeros((1, m))
    weights = np.ones(1)
    for j, tau in fixed:
        times[:, j] = tau
    for slots, t, w in pieces:
        if not slots:
            continue
        q_old = len(weights)
        times = np.repeat(times, len(w), axis=0)
        times[:, slots] = np.tile(t, (q_old, 1))
        weights = np.repeat(weights, len(w)) * np.tile(w, q_old)
    return times, weights


def _term_spectral(
    term: BlockTerm, T: float, torus: FlatTorus, modes: np.ndarray, g: int
) -> complex:
    n = torus.dim
    m = len(term.factors)
    tables = [
        {f: c * fac.q_weight for f, c in fac.field.frequency_table().items()}
        for fac in term.factors
    ]
    total = 0j
    for sigma in itertools.permutations(range(m)):
        taus = [term.factors[s].profile.tau for s in sigma if term.factors[s].is_point]
        if any(a >= b for a, b in itertools.pairwise(taus)):
            continue
        times, weights = _slot_quadrature(term, sigma, g)
        for j, s in enumerate(sigma):
            prof = term.factors[s].profile
            if isinstance(prof, Density):
                weights = weights * prof(times[:, j])
        ends = np.ones((len(times), 1))
        lengths = np.diff(np.concatenate([0 * ends, times, ends], axis=1), axis=1)
        sign = super_sign(sigma, term.degrees)
        keys = [list(tables[s].items()) for s in sigma]
        for chain in itertools.product(*keys):
            freqs = np.array([f for f, _ in chain], dtype=np.int64).reshape(m, n)
            if freqs.sum(axis=0).any():
                continue
            prod = np.zeros(1 << n, dtype=np.complex128)
            prod[0] = 1.0
            for _, c in chain:
                prod = clifford_product_arrays(c, prod, n)
            st = complex(supertrace_arrays(prod, n))
            if st == 0:
                continue
            partial = np.concatenate([np.zeros((1, n), dtype=np.int64), np.cumsum(freqs, axis=0)])
            energies = mode_energies(torus, modes[None, :, :] + partial[:, None, :])  # (M+1, K)
            keep = energies.min(axis=0) * T < 45.0
            if not keep.any():
                continue
            heat = np.exp(-T * lengths @ energies[:, keep]).sum(axis=1)
            total += sign * st * complex(np.dot(weights, heat))
    return total * term.coeff * 2.0 ** (-term.positive_factors / 2)


def integrate_spectral(
    theta: IntegralForm,
    T: float,
    torus: FlatTorus,
    settings: SpectralSettings = SpectralSettings(),
    bundle: TwistBundle | None = None,
) -> complex:
    """I_T[theta] as ordered heat-supertrace integrals in the Fourier basis.

    Raises:
        SpectralCutoffError: If the estimated tail beyond the cutoff is too large.
    """
    if bundle is not None and np.any(bundle.fluxes):
        raise UnsupportedBackendError("the chain evaluator handles flat twists only")
    superdim = 1 if bundle is None else bundle.superdimension()
    reach = max(
        (
            sum(f.field.bandwidth() for f in term.factors)
            for term in theta.terms
        ),
        default=0,
    )
    if reach >= settings.cutoff:
        raise SpectralCutoffError(
            f"cutoff {settings.cutoff} does not exceed the chain reach {reach}", tail=math.inf
        )
    scale = 2.0 ** (torus.dim / 2) * max(norm(theta), 1.0) * abs(superdim)
    tail = scale * fourier_tail(torus, T, settings.cutoff, reach)
    logger.debug("spectral cutoff %d: tail estimate %.3g", settings.cutoff, tail)
    if tail > settings.tail_tolerance:
        raise SpectralCutoffError(
            f"tail {tail:.3g} beyond cutoff {settings.cutoff} exceeds {settings.tail_tolerance:g}",
            tail=tail,
        )
    modes = torus.lattice_box(settings.cutoff)
    total = 0j
    for term in theta.terms:
        total += _term_spectral(term, T, torus, modes, settings.gauss_nodes)
    return total * superdim
