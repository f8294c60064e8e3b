"""Zeta-regularized determinant of d/dt with holonomy against the spin-lift supertrace."""

from __future__ import annotations

import math

import numpy as np

from loopint.config import ExperimentConfig
from loopint.report import SuiteReport
from loopint.spectral import zeta_det_toy
from loopint.suites.base import close_check, new_report

NAME = "zeta-toy"


def run(config: ExperimentConfig) -> SuiteReport:
    points = config.suites.zeta_toy.points
    tolerance = config.tolerances.zeta
    report = new_report(NAME, config)
    alphas = 2 * math.pi * (np.arange(points) + 0.5) / points
    rows = []
    for alpha in alphas:
        det, lifted = zeta_det_toy(float(alpha))
        rows.append({"alpha": float(alpha), "determinant": det, "supertrace_square": lifted})
        report.add(close_check(f"alpha={alpha:.6f}", det, lifted, tolerance))
    report.tables["sweep"] = rows
    return report
