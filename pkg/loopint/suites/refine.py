"""Grid refinement of the flux-holonomy integrand on shared Brownian samples."""

from __future__ import annotations

import logging

import numpy as np

from loopint.bismut import bch_even_q
from loopint.config import ExperimentConfig
from loopint.geometry import DiscreteLoop
from loopint.integrator import curvature_weight, refinement_sweep
from loopint.phases import integral_from_index
from loopint.report import CheckResult, SuiteReport
from loopint.suites.base import new_report, stderr_check

logger = logging.getLogger(__name__)

NAME = "refine"


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.refine
    tol = config.tolerances
    bundle = config.twist_bundle([cfg.flux])
    torus = bundle.base
    weight = curvature_weight(cfg.T, torus.scalar_curvature)
    report = new_report(NAME, config)
    settings = config.mc_settings()

    def integrand(loop: DiscreteLoop) -> np.ndarray:
        return weight * bch_even_q(loop, bundle, cfg.T, splitting=settings.splitting)

    sweep = refinement_sweep(integrand, cfg.T, torus, cfg.grids, settings)
    expected = integral_from_index(-cfg.flux * bundle.superdimension(), torus.dim)
    finest = sweep.estimates[-1]
    report.estimates["sweep"] = sweep
    report.add(
        stderr_check(
            "finest_vs_spectral", sweep.value, expected, finest.stderr, tol.stderr_k,
            grid=sweep.grids[-1],
        )
    )
    first, last = sweep.differences[0], sweep.differences[-1]
    slack = tol.stderr_k * finest.stderr
    report.add(
        CheckResult(
            "defect_decreasing", bool(last <= first + slack), sweep.differences, None, slack,
            {"slope": sweep.slope, "extrapolated": sweep.extrapolated},
        )
    )
    report.tables["sweep"] = [
        {
            "grid": m,
            "value_re": est.value.real,
            "value_im": est.value.imag,
            "stderr": est.stderr,
            "difference": diff,
        }
        for m, est, diff in zip(
            sweep.grids, sweep.estimates, [np.nan, *sweep.differences], strict=True
        )
    ]
    logger.info("refinement over %s: differences %s, slope %.3g", sweep.grids,
                sweep.differences, sweep.slope)
    return report
