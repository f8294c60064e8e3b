"""Monte Carlo checks of the loop and path measures against closed forms."""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from loopint.config import ExperimentConfig
from loopint.fields import TrigPolynomial
from loopint.geometry import (
    DiscreteLoop,
    FlatTorus,
    heat_kernel,
    heat_kernel_dual,
    heat_kernel_theta_oracle,
)
from loopint.report import CheckResult, SuiteReport
from loopint.suites.base import close_check, new_report, stderr_check
from loopint.wiener import (
    Comparison,
    WienerSampler,
    convolution_check,
    feynman_kac_check,
    rotation_pvalue,
    total_mass_check,
    trace_relation_check,
    uniform_marginal_pvalues,
)

logger = logging.getLogger(__name__)

NAME = "wiener-checks"
KS_THRESHOLD = 1e-4
CONSERVATION_TOLERANCE = 1e-10
THETA_TOLERANCE = 1e-12


def _comparison_check(cmp: Comparison, k: float, T: float) -> CheckResult:
    name = f"{cmp.name.replace(' ', '_')}[T={T}]"
    return stderr_check(name, cmp.value, cmp.expected, cmp.stderr, k, T=T, **cmp.detail)


def kernel_conservation_defect(torus: FlatTorus, t: float, grid: int = 48) -> float:
    """|int p_t(x, y) dy - 1| by lattice quadrature."""
    points, weight = torus.quadrature_grid(grid)
    x = torus.from_unit(np.full(torus.dim, 0.3))
    return abs(float(heat_kernel(torus, t, x, points).sum() * weight) - 1.0)


def theta_representation_defect(torus: FlatTorus, t: float) -> float:
    """Direct lattice sum against the Fourier sum and, on diagonal lattices, theta functions."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(8):
        x, y = torus.from_unit(rng.random(torus.dim)), torus.from_unit(rng.random(torus.dim))
        direct = float(heat_kernel(torus, t, x, y))
        worst = max(worst, abs(direct - float(heat_kernel_dual(torus, t, x, y))))
        if np.allclose(torus.lattice, np.diag(np.diag(torus.lattice))):
            worst = max(worst, abs(direct - heat_kernel_theta_oracle(torus, t, x, y)))
    return worst


def _marker(torus: FlatTorus, axis: int) -> Callable[[np.ndarray], np.ndarray]:
    def value(x: np.ndarray) -> np.ndarray:
        u = torus.to_unit(x)
        return 1.0 + 0.5 * np.cos(2 * np.pi * u[..., axis % torus.dim])

    return value


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.wiener_checks
    tol = config.tolerances
    mc = config.monte_carlo
    torus = config.torus()
    n = cfg.n_samples
    report = new_report(NAME, config)
    kwargs = {"chunk_size": mc.chunk_size, "workers": mc.workers}

    # heat kernels are exact, independent of T sampling
    report.add(
        close_check(
            "heat_kernel.conservation", kernel_conservation_defect(torus, 0.1), 0.0,
            CONSERVATION_TOLERANCE,
        )
    )
    circle = FlatTorus.circle()
    direct = float(heat_kernel(circle, 0.1, np.zeros(1), np.zeros(1)))
    series = sum((2 * np.pi * 0.1) ** -0.5 * np.exp(-(k**2) / 0.2) for k in range(-20, 21))
    report.add(close_check("heat_kernel.circle_poisson", direct, series, THETA_TOLERANCE))
    report.add(
        close_check(
            "heat_kernel.theta_representations", theta_representation_defect(torus, 0.1), 0.0,
            1e-10,
        )
    )

    for T in config.T_values:
        sampler = WienerSampler(torus, T, mc.grid, mc.seed)
        mass = total_mass_check(sampler, n, mc.seed, **kwargs)
        report.add(_comparison_check(mass, tol.stderr_k, T))

        pvalues = uniform_marginal_pvalues(sampler, min(n, 20_000), mc.seed)
        report.add(
            CheckResult(f"uniform_marginal[T={T}]", min(pvalues) > KS_THRESHOLD, pvalues, None,
                        KS_THRESHOLD)
        )
        pvalue = rotation_pvalue(sampler, mc.grid // 4, min(n, 20_000), mc.seed)
        report.add(
            CheckResult(f"rotation_invariance[T={T}]", pvalue > KS_THRESHOLD, pvalue, None,
                        KS_THRESHOLD)
        )

    T = config.T_values[0]
    marker = _marker(torus, 0)

    def loop_functional(loop: DiscreteLoop) -> np.ndarray:
        return marker(loop.lifts[:, loop.m // 4])

    trace = trace_relation_check(torus, T, loop_functional, n, mc.seed, mc.grid, **kwargs)
    report.add(_comparison_check(trace, tol.stderr_k, T))

    x = torus.from_unit(np.full(torus.dim, 0.1))
    y = torus.from_unit(np.full(torus.dim, 0.6))
    conv = convolution_check(torus, T, x, y, marker, _marker(torus, 1), n, mc.seed, mc.grid)
    report.add(_comparison_check(conv, tol.stderr_k, T))

    freq = tuple(cfg.potential_freq)
    if len(freq) != torus.dim:
        freq = (1,) + (0,) * (torus.dim - 1)
    potential = TrigPolynomial.cosine(freq, cfg.potential_amplitude)
    fk = feynman_kac_check(
        torus, T, potential, x, n, mc.seed, modes=cfg.galerkin_modes, **kwargs
    )
    report.add(_comparison_check(fk, tol.stderr_k, T))

    logger.info("wiener checks: %d checks, ok=%s", len(report.checks), report.ok)
    return report
