"""Algebraic property checks: Clifford supertraces, block decomposition and q."""

from __future__ import annotations

import itertools
import logging

import numpy as np

from loopint.clifford import (
    CliffordElement,
    clifford_mul,
    compose,
    permute_degrees,
    random_homogeneous,
    super_sign,
    supertrace,
)
from loopint.config import ExperimentConfig
from loopint.fields import FormField, TrigPolynomial, random_form_field
from loopint.geometry import FlatTorus
from loopint.loopforms import (
    BlockTerm,
    Density,
    Factor,
    IntegralForm,
    PointMass,
    block_norm,
    cube_norm,
    decompose_blocks,
    embed_blocks,
    lift_form,
    norm,
)
from loopint.qfunctional import q, q_rotation_check
from loopint.report import CheckResult, SuiteReport
from loopint.suites.base import new_report
from loopint.wiener import WienerSampler, stream

logger = logging.getLogger(__name__)

NAME = "invariants"
MAX_CLIFFORD_DIM = 6
LOOP_GRID = 16


# ---------------------------------------------------------------------------
# Clifford
# ---------------------------------------------------------------------------


def _product(factors: list[CliffordElement]) -> CliffordElement:
    """a_N ... a_1 for factors listed (a_1, ..., a_N)."""
    out = factors[0]
    for f in factors[1:]:
        out = clifford_mul(f, out)
    return out


def cyclic_supertrace_defect(rng: np.random.Generator, cases: int) -> float:
    """max |str(a_N...a_1) - (-1)^{|a_1|(|a_N|+...+|a_2|)} str(a_1 a_N ... a_2)|."""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, MAX_CLIFFORD_DIM + 1))
        count = int(rng.integers(1, 5))
        factors = [random_homogeneous(rng, n) for _ in range(count)]
        parities = [f.parity() for f in factors]
        lhs = supertrace(_product(factors))
        rest = _product(factors[1:]) if count > 1 else CliffordElement.scalar(n, 1.0)
        sign = -1 if parities[0] * sum(parities[1:]) % 2 else 1
        rhs = sign * supertrace(clifford_mul(factors[0], rest))
        worst = max(worst, abs(lhs - rhs))
    return worst


def supercommutator_defect(rng: np.random.Generator, cases: int) -> float:
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, MAX_CLIFFORD_DIM + 1))
        a, b = random_homogeneous(rng, n), random_homogeneous(rng, n)
        sign = -1 if a.parity() * b.parity() % 2 else 1
        worst = max(worst, abs(supertrace(clifford_mul(a, b) - clifford_mul(b, a) * sign)))
    return worst


def supertrace_parity_defect(rng: np.random.Generator, cases: int) -> float:
    """str vanishes on the odd part for even n and on the even part for odd n."""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, MAX_CLIFFORD_DIM + 1))
        a = random_homogeneous(rng, n, parity=1 - n % 2)
        worst = max(worst, abs(supertrace(a)))
    return worst


def associativity_defect(rng: np.random.Generator, cases: int) -> float:
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, MAX_CLIFFORD_DIM + 1))
        a, b, c = (CliffordElement(n, rng.normal(size=1 << n)) for _ in range(3))
        left = clifford_mul(clifford_mul(a, b), c)
        right = clifford_mul(a, clifford_mul(b, c))
        worst = max(worst, float(np.abs(left.coeffs - right.coeffs).max()))
    return worst


def super_sign_violations(rng: np.random.Generator, sizes: tuple[int, ...] = (3, 4)) -> int:
    """Count failures of sgn(sigma o rho; l) = sgn(rho; l^sigma) sgn(sigma; l), exhaustively."""
    failures = 0
    for size in sizes:
        perms = list(itertools.permutations(range(size)))
        for degrees in itertools.product((0, 1), repeat=size):
            for sigma, rho in itertools.product(perms, perms):
                combined = super_sign(compose(sigma, rho), degrees)
                permuted = permute_degrees(degrees, sigma)
                split = super_sign(rho, permuted) * super_sign(sigma, degrees)
                failures += combined != split
        # random non-binary degree vectors: only parities matter
        degrees = tuple(int(d) for d in rng.integers(0, 4, size))
        parities = tuple(d % 2 for d in degrees)
        failures += sum(super_sign(s, degrees) != super_sign(s, parities) for s in perms)
    return failures


# ---------------------------------------------------------------------------
# Block decomposition
# ---------------------------------------------------------------------------


def _single_component(rng: np.random.Generator, n: int, degree: int) -> FormField:
    full = random_form_field(rng, n, degree)
    mask = next(iter(full.components))
    return FormField(n, degree, {mask: full.components[mask]})


def block_isometry_defect(
    rng: np.random.Generator, torus: FlatTorus, cases: int
) -> tuple[float, float]:
    """Cube norm of embedded blocks against the block norm, and the q round-trip defect."""
    n = torus.dim
    sampler = WienerSampler(torus, 1.0, LOOP_GRID)
    loops = sampler.draw(stream(int(rng.integers(1 << 31)), 0), 4)
    worst_norm = 0.0
    worst_q = 0.0
    for _ in range(cases):
        degree = int(rng.integers(2, n + 1))
        tau = int(rng.integers(LOOP_GRID)) / LOOP_GRID
        field = _single_component(rng, n, degree)
        factor = Factor(PointMass(tau), field)
        theta = IntegralForm(n, (BlockTerm((factor,)),))
        embedded = embed_blocks(theta)
        x = torus.from_unit(rng.random(n))
        group = embedded.terms[0].factors
        worst_norm = max(
            worst_norm,
            abs(cube_norm(group, x, torus.inverse) - block_norm(factor, x, torus.inverse)),
        )
        back = decompose_blocks(embedded)
        worst_q = max(
            worst_q, float(np.abs(q(loops, back).value - q(loops, theta).value).max())
        )
    return worst_norm, worst_q


# ---------------------------------------------------------------------------
# q functional
# ---------------------------------------------------------------------------


def random_form(
    rng: np.random.Generator,
    n: int,
    max_factors: int = 3,
    points_only: bool = False,
    degree_parity: int | None = None,
) -> IntegralForm:
    """Random single-term form with distinct grid-time point masses and cosine densities."""
    count = int(rng.integers(1, max_factors + 1))
    times = rng.choice(LOOP_GRID, size=count, replace=False) / LOOP_GRID
    factors = []
    for tau in times:
        degree = int(rng.integers(0, min(n, 2) + 1))
        field = random_form_field(rng, n, degree)
        if points_only or rng.random() < 0.5:
            factors.append(Factor(PointMass(float(tau)), field))
        else:
            freq = int(rng.integers(0, 3))
            poly = TrigPolynomial.cosine((freq,), float(rng.normal())) + TrigPolynomial.constant(1)
            density = Density(poly=poly)
            factors.append(lift_form(density, field).terms[0].factors[0])
    if degree_parity is not None and sum(f.degree for f in factors) % 2 != degree_parity:
        tau = float(next(t for t in np.arange(LOOP_GRID) / LOOP_GRID if t not in set(times)))
        factors.append(Factor(PointMass(tau), random_form_field(rng, n, 1)))
    return IntegralForm(n, (BlockTerm(tuple(factors), complex(rng.normal())),))


def q_bound_violations(rng: np.random.Generator, torus: FlatTorus, cases: int) -> int:
    """Count forms with |q(theta)| > 2^{n/2} ||theta|| on a batch of loops."""
    n = torus.dim
    loops = WienerSampler(torus, 1.0, LOOP_GRID).draw(stream(int(rng.integers(1 << 31)), 0), 8)
    bound_scale = 2.0 ** (n / 2)
    violations = 0
    for _ in range(cases):
        theta = random_form(rng, n)
        evaluation = q(loops, theta)
        excess = np.abs(evaluation.value) - bound_scale * norm(theta) - evaluation.defect
        violations += int((excess > 1e-12).sum())
    return violations


def q_rotation_defect(rng: np.random.Generator, torus: FlatTorus, cases: int) -> float:
    n = torus.dim
    loops = WienerSampler(torus, 1.0, LOOP_GRID).draw(stream(int(rng.integers(1 << 31)), 0), 8)
    worst = 0.0
    for _ in range(cases):
        theta = random_form(rng, n, points_only=True)
        t = int(rng.integers(1, LOOP_GRID)) / LOOP_GRID
        worst = max(worst, float(q_rotation_check(loops, theta, t).max()))
    return worst


def q_parity_defect(rng: np.random.Generator, torus: FlatTorus, cases: int) -> float:
    """q vanishes on forms whose total degree has the parity opposite to n."""
    n = torus.dim
    loops = WienerSampler(torus, 1.0, LOOP_GRID).draw(stream(int(rng.integers(1 << 31)), 0), 8)
    worst = 0.0
    for _ in range(cases):
        theta = random_form(rng, n, points_only=True, degree_parity=1 - n % 2)
        worst = max(worst, float(np.abs(q(loops, theta).value).max()))
    return worst


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.invariants
    exact = config.tolerances.exact
    rng = np.random.default_rng(cfg.seed)
    torus = config.torus()
    report = new_report(NAME, config)

    def add(name: str, value: float, tolerance: float = exact) -> None:
        report.add(CheckResult(name, bool(value <= tolerance), value, 0.0, tolerance))

    add("clifford.cyclic_supertrace", cyclic_supertrace_defect(rng, cfg.random_cases))
    add("clifford.supercommutator", supercommutator_defect(rng, cfg.random_cases))
    add("clifford.supertrace_parity", supertrace_parity_defect(rng, cfg.random_cases))
    add("clifford.associativity", associativity_defect(rng, cfg.random_cases))
    sign_failures = super_sign_violations(rng)
    report.add(CheckResult("clifford.super_sign_composition", sign_failures == 0, sign_failures, 0))

    norm_defect, round_trip = block_isometry_defect(rng, torus, cfg.block_forms)
    add("blocks.isometry", norm_defect)
    add("blocks.round_trip", round_trip)

    violations = q_bound_violations(rng, torus, cfg.q_forms)
    report.add(CheckResult("q.norm_bound", violations == 0, violations, 0))
    add("q.rotation_invariance", q_rotation_defect(rng, torus, cfg.q_forms))
    add("q.parity_vanishing", q_parity_defect(rng, torus, cfg.q_forms))

    logger.info("invariants: %d checks, ok=%s", len(report.checks), report.ok)
    return report
