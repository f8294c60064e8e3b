"""Exact Wiener-measure sampling on flat tori and seeded Monte Carlo estimation.

Loops under the unnormalized measure W_T are drawn as: a uniform base point,
a winding vector with weight exp(-|L lambda|^2 / 2T) and a Gaussian bridge in
the universal cover. Pinned paths from x to y are drawn the same way with the
winding weight of the displacement. Estimates carry the total mass (Z for
loops, p_T(y, x) for pinned paths) as their scale.

Chunk i of every run draws from ``Philox(SeedSequence(seed, spawn_key=(i,)))``
and partial sums are merged in chunk order with exact summation, so results
depend on (seed, n, chunk size) only, never on the worker count.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.linalg
import scipy.stats

from loopint.bundles import PotentialSpec, path_ordered_exponential
from loopint.errors import GridError, NumericalFailure
from loopint.fields import TrigPolynomial
from loopint.geometry import (
    DiscreteLoop,
    DiscretePath,
    FlatTorus,
    heat_kernel,
    rotate_loop,
    trace_heat,
    uniform_grid,
)

logger = logging.getLogger(__name__)

WINDING_CUTOFF = 1e-14
DEFAULT_CHUNK = 4096

# ---------------------------------------------------------------------------
# Streams and winding tables
# ---------------------------------------------------------------------------


def stream(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based generator for one chunk of a seeded run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def winding_table(
    torus: FlatTorus, T: float, offset: np.ndarray | None = None, cutoff: float = WINDING_CUTOFF
) -> tuple[np.ndarray, np.ndarray]:
    """Lattice vectors and probabilities proportional to exp(-|d + L lambda|^2 / 2T).

    Vectors whose weight falls below ``cutoff`` times the largest are dropped.
    """
    offset = np.zeros(torus.dim) if offset is None else np.asarray(offset, dtype=float)
    radius = int(math.ceil(math.sqrt(2 * T * -math.log(cutoff)) / torus.shortest_scale)) + 1
    box = torus.lattice_box(radius)
    shifts = offset + box @ torus.lattice.T
    log_w = -np.einsum("kn,kn->k", shifts, shifts) / (2 * T)
    log_w -= log_w.max()
    keep = log_w >= math.log(cutoff)
    weights = np.exp(log_w[keep])
    return box[keep], weights / weights.sum()


def _bridge(rng: np.random.Generator, size: int, m: int, n: int) -> np.ndarray:
    """Standard Brownian bridge on [0, 1] at times j/m, j = 0..m, shape (size, m + 1, n)."""
    steps = rng.standard_normal((size, m, n)) / math.sqrt(m)
    walk = np.concatenate([np.zeros((size, 1, n)), np.cumsum(steps, axis=1)], axis=1)
    t = np.arange(m + 1) / m
    return walk - t[None, :, None] * walk[:, -1:, :]


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


class Sampler(Protocol):
    """Anything with a total mass and a batched draw."""

    mass: float

    def draw(self, rng: np.random.Generator, size: int) -> DiscreteLoop | DiscretePath: ...


@dataclass(eq=False)
class WienerSampler:
    """Loop sampler for W_T on a flat torus with m grid nodes."""

    torus: FlatTorus
    T: float
    m: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.m < 2:
            raise GridError(f"loop sampling needs m >= 2, got {self.m}")
        self.Z = trace_heat(self.torus, self.T)
        self.windings, self.probabilities = winding_table(self.torus, self.T)
        logger.debug(
            "loop sampler: n=%d T=%g m=%d Z=%.6g sectors=%d",
            self.torus.dim, self.T, self.m, self.Z, len(self.windings),
        )

    @property
    def mass(self) -> float:
        return self.Z

    def draw(self, rng: np.random.Generator, size: int) -> DiscreteLoop:
        return sample_loops(self, rng, size)


def sample_loops(sampler: WienerSampler, rng: np.random.Generator, size: int) -> DiscreteLoop:
    """Batch of loops with exact finite-dimensional marginals on the uniform grid."""
    torus, m, n = sampler.torus, sampler.m, sampler.torus.dim
    base = torus.from_unit(rng.random((size, n)))
    pick = rng.choice(len(sampler.windings), size=size, p=sampler.probabilities)
    winding = sampler.windings[pick]
    t = uniform_grid(m)
    drift = t[None, :, None] * torus.from_unit(winding.astype(float))[:, None, :]
    noise = math.sqrt(sampler.T) * _bridge(rng, size, m, n)[:, :-1]
    lifts = base[:, None, :] + drift + noise
    return DiscreteLoop(torus, t, lifts, winding.astype(np.int64))


def sample_loop(sampler: WienerSampler, rng: np.random.Generator) -> DiscreteLoop:
    return sample_loops(sampler, rng, 1)


@dataclass(eq=False)
class BridgeSampler:
    """Pinned-path sampler for W_T^{yx}: paths from x to y with mass p_T(y, x)."""

    torus: FlatTorus
    T: float
    x: np.ndarray
    y: np.ndarray
    m: int

    def __post_init__(self) -> None:
        if self.m < 2:
            raise GridError(f"bridge sampling needs m >= 2, got {self.m}")
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        u = self.torus.to_unit(self.y - self.x)
        self.offset = self.torus.from_unit(u - np.round(u))
        self.windings, self.probabilities = winding_table(self.torus, self.T, self.offset)
        self.p = float(heat_kernel(self.torus, self.T, self.y, self.x))

    @property
    def mass(self) -> float:
        return self.p

    def draw(self, rng: np.random.Generator, size: int) -> DiscretePath:
        return sample_bridges(self, rng, size)


def sample_bridges(sampler: BridgeSampler, rng: np.random.Generator, size: int) -> DiscretePath:
    torus, m, n = sampler.torus, sampler.m, sampler.torus.dim
    pick = rng.choice(len(sampler.windings), size=size, p=sampler.probabilities)
    target = sampler.offset + torus.from_unit(sampler.windings[pick].astype(float))
    t = np.arange(m + 1) / m
    chord = sampler.x + t[None, :, None] * target[:, None, :]
    lifts = chord + math.sqrt(sampler.T) * _bridge(rng, size, m, n)
    return DiscretePath(torus, t, lifts)


def sample_bridge(
    torus: FlatTorus, T: float, x: np.ndarray, y: np.ndarray, m: int, rng: np.random.Generator
) -> DiscretePath:
    return sample_bridges(BridgeSampler(torus, T, x, y, m), rng, 1)


# ---------------------------------------------------------------------------
# Accumulators and estimates
# ---------------------------------------------------------------------------


@dataclass
class Accumulator:
    """Per-chunk partial sums; totals use exact summation so merges are order-free."""

    sums: list[complex] = field(default_factory=list)
    squares: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    clipped: int = 0
    ties: int = 0
    windings: Counter = field(default_factory=Counter)

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.complex128)
        self.sums.append(complex(values.sum()))
        self.squares.append(float((values.real**2 + values.imag**2).sum()))
        self.counts.append(len(values))

    def merge(self, other: Accumulator) -> Accumulator:
        return Accumulator(
            self.sums + other.sums,
            self.squares + other.squares,
            self.counts + other.counts,
            self.clipped + other.clipped,
            self.ties + other.ties,
            self.windings + other.windings,
        )

    @property
    def n(self) -> int:
        return sum(self.counts)

    def mean(self) -> complex:
        if not self.n:
            return 0j
        re = math.fsum(s.real for s in self.sums)
        im = math.fsum(s.imag for s in self.sums)
        return complex(re, im) / self.n

    def stderr(self) -> float:
        n = self.n
        if n < 2:
            return math.inf
        var = (math.fsum(self.squares) - n * abs(self.mean()) ** 2) / (n - 1)
        return math.sqrt(max(var, 0.0) / n)


@dataclass
class Estimate:
    """Scaled Monte Carlo mean: value = scale * mean, stderr = scale * sd / sqrt(n)."""

    value: complex
    stderr: float
    n_samples: int
    seed: int | None
    scale: float = 1.0
    diagnostics: dict = field(default_factory=dict)
    accumulator: Accumulator | None = field(default=None, repr=False)

    @classmethod
    def from_accumulator(cls, acc: Accumulator, scale: float, seed: int | None) -> Estimate:
        diagnostics = {"clipped": acc.clipped, "ties": acc.ties}
        if acc.windings:
            diagnostics["winding_strata"] = {str(k): v for k, v in sorted(acc.windings.items())}
        return cls(
            scale * acc.mean(), abs(scale) * acc.stderr(), acc.n, seed, scale, diagnostics, acc
        )

    def merge(self, other: Estimate) -> Estimate:
        if self.accumulator is None or other.accumulator is None:
            raise ValueError("only estimates that kept their accumulator can be merged")
        if not math.isclose(self.scale, other.scale, rel_tol=1e-15):
            raise ValueError("cannot merge estimates of different measures")
        return Estimate.from_accumulator(
            self.accumulator.merge(other.accumulator), self.scale, self.seed
        )

    def scaled(self, factor: complex) -> Estimate:
        return Estimate(
            self.value * factor, self.stderr * abs(factor), self.n_samples, self.seed,
            self.scale, dict(self.diagnostics),
        )

    def within(self, expected: complex, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.value - expected) <= k * self.stderr + floor

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------


def chunk_plan(n: int, chunk_size: int, first_chunk: int = 0) -> list[tuple[int, int]]:
    """(chunk index, size) pairs covering n samples."""
    sizes = [chunk_size] * (n // chunk_size)
    if n % chunk_size:
        sizes.append(n % chunk_size)
    return [(first_chunk + i, size) for i, size in enumerate(sizes)]


def _run_chunk(
    sampler: Sampler,
    integrand: Callable[[DiscreteLoop | DiscretePath], np.ndarray],
    seed: int,
    chunk: int,
    size: int,
    clip: float | None,
) -> Accumulator:
    rng = stream(seed, chunk)
    batch = sampler.draw(rng, size)
    values = np.asarray(integrand(batch), dtype=np.complex128).reshape(size)
    if np.isnan(values).any():
        raise NumericalFailure(f"integrand returned NaN in chunk {chunk}")
    acc = Accumulator()
    if clip is not None:
        mags = np.abs(values)
        over = mags > clip
        if over.any():
            values = values.copy()
            values[over] = values[over] / mags[over] * clip
            acc.clipped = int(over.sum())
            logger.warning(
                "clipped %d integrand value(s) above %g in chunk %d", acc.clipped, clip, chunk
            )
    acc.add(values)
    acc.ties = int(getattr(batch, "ties", 0))
    winding = getattr(batch, "winding", None)
    if winding is not None:
        acc.windings = Counter(tuple(int(v) for v in w) for w in winding)
    logger.debug("chunk %d done (%d samples)", chunk, size)
    return acc


def mc_expect(
    sampler: Sampler,
    integrand: Callable[[DiscreteLoop | DiscretePath], np.ndarray],
    n: int,
    seed: int | None = None,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    clip: float | None = None,
    first_chunk: int = 0,
) -> Estimate:
    """Estimate mass * E[integrand] from n samples drawn in seeded chunks.

    Args:
        sampler: Loop or bridge sampler.
        integrand: Maps a batch to values of shape (batch,).
        n: Number of samples.
        seed: Root seed, defaulting to the sampler's; chunk i uses
            stream(seed, first_chunk + i).
        chunk_size: Samples per chunk.
        workers: Thread count; has no effect on the result.
        clip: Magnitude above which values are clipped with a warning.
        first_chunk: Offset of the chunk counter, for split runs that merge later.

    Raises:
        NumericalFailure: If the integrand produced a NaN.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if seed is None:
        seed = getattr(sampler, "seed", 0)
    jobs = chunk_plan(n, chunk_size, first_chunk)

    def work(job: tuple[int, int]) -> Accumulator:
        return _run_chunk(sampler, integrand, seed, job[0], job[1], clip)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    acc = Accumulator()
    for part in parts:
        acc = acc.merge(part)
    return Estimate.from_accumulator(acc, sampler.mass, seed)


def pinned_mc_expect(
    torus: FlatTorus,
    T: float,
    x: np.ndarray,
    y: np.ndarray,
    integrand: Callable[[DiscretePath], np.ndarray],
    n: int,
    seed: int = 0,
    m: int = 16,
    **kwargs: object,
) -> Estimate:
    """W_T^{yx}[integrand] by bridge sampling."""
    return mc_expect(BridgeSampler(torus, T, x, y, m), integrand, n, seed, **kwargs)


# ---------------------------------------------------------------------------
# Measure checks
# ---------------------------------------------------------------------------


@dataclass
class Comparison:
    """A Monte Carlo value against a reference with its combined standard error."""

    name: str
    value: complex
    expected: complex
    stderr: float
    detail: dict = field(default_factory=dict)

    @property
    def deviation(self) -> float:
        return abs(self.value - self.expected)

    def within(self, k: float = 3.0, floor: float = 0.0) -> bool:
        return self.deviation <= k * self.stderr + floor


def total_mass_check(sampler: WienerSampler, n: int, seed: int = 0, **kwargs: object) -> Comparison:
    est = mc_expect(sampler, lambda batch: np.ones(batch.batch), n, seed, **kwargs)
    return Comparison("total mass", est.value, sampler.Z, est.stderr)


def uniform_marginal_pvalues(sampler: WienerSampler, n: int, seed: int = 0) -> list[float]:
    """Kolmogorov-Smirnov p-values of gamma(0) per cell coordinate."""
    loops = sampler.draw(stream(seed, 0), n)
    u = sampler.torus.to_unit(loops.lifts[:, 0])
    u = u - np.floor(u)
    return [float(scipy.stats.kstest(u[:, i], "uniform").pvalue) for i in range(u.shape[1])]


def _summary(loop: DiscreteLoop) -> np.ndarray:
    quarter = loop.m // 4
    return np.linalg.norm(loop.lifts[:, quarter] - loop.lifts[:, 0], axis=-1)


def rotation_pvalue(sampler: WienerSampler, steps: int, n: int, seed: int = 0) -> float:
    """Two-sample KS p-value comparing rotated loops with an independent draw."""
    rotated = rotate_loop(sampler.draw(stream(seed, 0), n), steps)
    fresh = sampler.draw(stream(seed, 1), n)
    return float(scipy.stats.ks_2samp(_summary(rotated), _summary(fresh)).pvalue)


def chord_deviation(
    torus: FlatTorus, T: float, x: np.ndarray, y: np.ndarray, m: int, n: int, seed: int = 0
) -> float:
    """Mean sup-distance of pinned paths from their straight chord."""
    path = sample_bridges(BridgeSampler(torus, T, x, y, m), stream(seed, 0), n)
    t = path.times[None, :, None]
    chord = path.lifts[:, :1] + t * (path.lifts[:, -1:] - path.lifts[:, :1])
    return float(np.linalg.norm(path.lifts - chord, axis=-1).max(axis=1).mean())


def galerkin_heat_diagonal(
    torus: FlatTorus, T: float, potential: TrigPolynomial, x: np.ndarray, modes: int = 8
) -> float:
    """e^{-T(H_0 + V)}(x, x) by exact exponentiation on a Fourier box."""
    box = torus.lattice_box(modes)
    wave = box @ torus.dual.T
    energy = np.einsum("kn,kn->k", wave, wave) / 2
    index = {tuple(int(v) for v in k): i for i, k in enumerate(box)}
    coeffs = potential.terms()
    hamiltonian = np.diag(energy).astype(np.complex128)
    for i, k in enumerate(box):
        for f, c in coeffs.items():
            j = index.get(tuple(int(a - b) for a, b in zip(k, f, strict=True)))
            if j is not None:
                hamiltonian[i, j] += c
    propagator = scipy.linalg.expm(-T * hamiltonian)
    phase = np.exp(2j * np.pi * (box @ torus.to_unit(np.asarray(x, dtype=float))))
    return float((phase @ propagator @ phase.conj()).real / torus.volume)


def feynman_kac_check(
    torus: FlatTorus,
    T: float,
    potential: TrigPolynomial,
    x: np.ndarray,
    n: int,
    seed: int = 0,
    m: int = 32,
    modes: int = 8,
    substeps: int = 2,
    **kwargs: object,
) -> Comparison:
    """W_T^{xx}[U_T(1, gamma)] for a scalar potential against the Galerkin kernel."""
    spec = PotentialSpec(scalar=potential)

    def integrand(path: DiscretePath) -> np.ndarray:
        u = path_ordered_exponential(path.close(), T, potential=spec, substeps=substeps)
        return u[:, 0, 0]

    est = pinned_mc_expect(torus, T, x, x, integrand, n, seed, m, **kwargs)
    exact = galerkin_heat_diagonal(torus, T, potential, x, modes)
    return Comparison("feynman-kac", est.value, exact, est.stderr, {"m": m})


def trace_relation_check(
    torus: FlatTorus,
    T: float,
    integrand: Callable[[DiscreteLoop], np.ndarray],
    n: int,
    seed: int = 0,
    m: int = 16,
    grid: int = 8,
    **kwargs: object,
) -> Comparison:
    """W_T[F] against the lattice quadrature of W_T^{xx}[F] over x."""
    loop_est = mc_expect(WienerSampler(torus, T, m), integrand, n, seed, **kwargs)
    points, weight = torus.quadrature_grid(grid)
    per_node = max(n // len(points), 64)
    total = 0j
    var = 0.0
    for i, x in enumerate(points):
        est = pinned_mc_expect(
            torus, T, x, x, lambda p: integrand(p.close()), per_node, seed + 1 + i, m, **kwargs
        )
        total += weight * est.value
        var += (weight * est.stderr) ** 2
    stderr = math.sqrt(loop_est.stderr**2 + var)
    return Comparison("trace relation", loop_est.value, total, stderr, {"grid": grid})


def convolution_check(
    torus: FlatTorus,
    T: float,
    x: np.ndarray,
    y: np.ndarray,
    first: Callable[[np.ndarray], np.ndarray],
    second: Callable[[np.ndarray], np.ndarray],
    n: int,
    seed: int = 0,
    m: int = 16,
    grid: int = 8,
) -> Comparison:
    """Markov property for F(gamma) = second(gamma(3/4)) * first(gamma(1/4)).

    The right side samples W_T^{yx}; the left side integrates the product of
    two half-time pinned expectations over the midpoint z on a lattice grid.
    """
    if m % 4:
        raise GridError("the convolution check needs m divisible by 4")

    def whole(path: DiscretePath) -> np.ndarray:
        q = path.torus.wrap(path.position(np.array([0.25, 0.75])))
        return second(q[:, 1]) * first(q[:, 0])

    rhs = pinned_mc_expect(torus, T, x, y, whole, n, seed, m)
    points, weight = torus.quadrature_grid(grid)
    per_node = max(n // len(points), 64)
    total = 0j
    var = 0.0
    half = m // 2
    for i, z in enumerate(points):
        a = pinned_mc_expect(
            torus, T / 2, x, z, lambda p: first(p.torus.wrap(p.position(0.5))),
            per_node, seed + 1 + 2 * i, half,
        )
        b = pinned_mc_expect(
            torus, T / 2, z, y, lambda p: second(p.torus.wrap(p.position(0.5))),
            per_node, seed + 2 + 2 * i, half,
        )
        total += weight * a.value * b.value
        var += weight**2 * (abs(a.value) ** 2 * b.stderr**2 + abs(b.value) ** 2 * a.stderr**2)
    stderr = math.sqrt(rhs.stderr**2 + var)
    return Comparison("convolution", total, rhs.value, stderr, {"grid": grid})
