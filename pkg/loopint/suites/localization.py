"""Localization to constant loops, plus the transport-variation and fibre checks.

For each flux k the spectral index, the localized characteristic integral and
the Monte Carlo integral of the even character must agree; for each winding m
the same holds for the odd character on the circle.
"""

from __future__ import annotations

import logging

import numpy as np

from loopint.bismut import equivariance_residual
from loopint.bundles import chern_character_form
from loopint.config import ExperimentConfig
from loopint.fields import FormField
from loopint.integrator import fiber_integration_check, relative_map_check
from loopint.localization import (
    LocalizationReport,
    a_hat_form,
    closedness_defect,
    localization_check_even,
    localization_check_odd,
)
from loopint.loopforms import IntegralForm, insert_at
from loopint.phases import flow_from_integral, index_from_integral
from loopint.report import CheckResult, SuiteReport
from loopint.suites.base import close_check, new_report, stderr_check
from loopint.wiener import Comparison, WienerSampler, stream

logger = logging.getLogger(__name__)

NAME = "localization"
CLOSEDNESS_TOLERANCE = 1e-8


def _add_report_checks(
    report: SuiteReport, label: str, loc: LocalizationReport, config: ExperimentConfig
) -> None:
    tol = config.tolerances
    report.add(close_check(f"{label}.spectral_vs_rhs", loc.spectral, loc.rhs, tol.spectral))
    if loc.mc is not None:
        report.add(
            stderr_check(
                f"{label}.mc_vs_spectral", loc.mc.value, loc.spectral, loc.mc.stderr,
                tol.stderr_k,
            )
        )


def _spread(values: list[complex]) -> float:
    return max((abs(a - b) for a in values for b in values), default=0.0)


def even_checks(report: SuiteReport, config: ExperimentConfig) -> None:
    cfg = config.suites.localization
    n = config.backend.dim
    settings = config.mc_settings(n_samples=cfg.n_samples) if cfg.monte_carlo else None
    for k in cfg.fluxes:
        bundle = config.twist_bundle([k])
        normalized = []
        for T in config.T_values:
            loc = localization_check_even(bundle, T, settings, config.spectral.landau_levels)
            report.estimates[f"even.k={k}.T={T}"] = loc
            _add_report_checks(report, f"even.k={k}[T={T}]", loc, config)
            normalized.append(index_from_integral(loc.rhs, n))
        report.add(
            close_check(f"even.k={k}.rhs_t_independence", _spread(normalized), 0.0,
                        config.tolerances.exact)
        )
        defect = closedness_defect(chern_character_form(bundle, config.T_values[0]), bundle.base)
        report.add(close_check(f"even.k={k}.chern_closed", defect, 0.0, CLOSEDNESS_TOLERANCE))
    torus = config.torus()
    a_hat = a_hat_form(torus, config.T_values[0])
    unit = np.zeros(1 << n)
    unit[0] = 1.0
    report.add(
        close_check("a_hat.flat_is_one", float(np.abs(a_hat.coeffs - unit).max()), 0.0,
                    config.tolerances.exact)
    )


def odd_checks(report: SuiteReport, config: ExperimentConfig) -> None:
    cfg = config.suites.localization
    sp = config.spectral
    settings = config.mc_settings(n_samples=cfg.n_samples) if cfg.monte_carlo else None
    for m in cfg.windings:
        g = config.gauge_map([m])
        normalized = []
        for T in config.T_values:
            loc = localization_check_odd(g, T, settings, sp.cutoff, sp.s_nodes)
            report.estimates[f"odd.m={m}.T={T}"] = loc
            _add_report_checks(report, f"odd.m={m}[T={T}]", loc, config)
            normalized.append(flow_from_integral(loc.rhs, g.base.dim, T))
        report.add(
            close_check(f"odd.m={m}.rhs_t_independence", _spread(normalized), 0.0,
                        config.tolerances.exact)
        )


# ---------------------------------------------------------------------------
# Transport variation, relative map and fibre integration
# ---------------------------------------------------------------------------


def _comparison(cmp: Comparison, name: str, k: float) -> CheckResult:
    return stderr_check(name, cmp.value, cmp.expected, cmp.stderr, k, **cmp.detail)


def variation_checks(report: SuiteReport, config: ExperimentConfig) -> None:
    cfg = config.suites.appendix
    tol = config.tolerances
    bundle = config.twist_bundle()
    if not np.any(bundle.fluxes):
        logger.warning("transport variation check skipped: the bundle carries no flux")
        return
    torus = bundle.base
    grid = config.monte_carlo.grid
    loops = WienerSampler(torus, cfg.T, grid).draw(stream(config.monte_carlo.seed, 0), cfg.loops)
    t = np.arange(grid) / grid
    v = 0.3 * np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1)
    residual = equivariance_residual(bundle, loops, v, cfg.eps, cfg.halvings)
    report.estimates["transport_variation"] = residual
    for j, ratio in enumerate(residual.ratios):
        report.add(close_check(f"transport_variation.ratio[{j}]", ratio, 2.0, tol.ratio))


def _named_form(config: ExperimentConfig, name: str | None, default: IntegralForm) -> IntegralForm:
    return default if name is None else config.build_form(config.forms[name])


def fibre_checks(report: SuiteReport, config: ExperimentConfig) -> None:
    cfg = config.suites.appendix
    k = config.tolerances.stderr_k
    torus = config.torus()
    n = torus.dim
    settings = config.mc_settings(n_samples=cfg.n_samples)
    top = FormField.constant(n, tuple(range(1, n + 1)))
    relative_form = _named_form(config, cfg.relative_form, insert_at(0.0, top))
    rel = relative_map_check(relative_form, cfg.T, torus, settings, cfg.quadrature_grid)
    report.add(_comparison(rel, "relative_map", k))

    if cfg.fiber_field is None:
        alpha = FormField.constant(n, (1,))
    else:
        alpha = config.form_field(cfg.fiber_field)
    rest = FormField.constant(n, tuple(range(2, n + 1))) if n > 1 else FormField.constant(n, ())
    theta = _named_form(config, cfg.fiber_form, insert_at(0.0, rest))
    fib = fiber_integration_check(
        alpha, theta, cfg.T, torus, settings, cfg.quadrature_grid, cfg.rotations
    )
    report.add(_comparison(fib, "fibre_integration", k))


def run(config: ExperimentConfig) -> SuiteReport:
    report = new_report(NAME, config)
    if config.backend.dim % 2 == 0:
        even_checks(report, config)
    else:
        logger.warning("even localization skipped on an odd-dimensional backend")
    odd_checks(report, config)
    if config.suites.appendix.enabled:
        variation_checks(report, config)
        fibre_checks(report, config)
    logger.info("localization: %d checks, ok=%s", len(report.checks), report.ok)
    return report
