"""Three-way check of the odd character on the circle.

Eigenvalue tracking of D_s = D + s c(g^{-1}dg) gives the spectral flow, the
heat-regularized s-integral reproduces it, and Monte Carlo integration of the
odd character reproduces i sqrt(2 pi / T) sf.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from loopint.bismut import bch_odd_closed_form, bch_odd_q, integrate_bch_odd
from loopint.config import ExperimentConfig
from loopint.phases import flow_from_integral, integral_from_flow
from loopint.report import CheckResult, SuiteReport
from loopint.spectral import dirac_spectrum, eigen_dump_rows, getzler_flow_integral, spectral_flow
from loopint.suites.base import close_check, new_report, stderr_check
from loopint.wiener import WienerSampler, stream

logger = logging.getLogger(__name__)

NAME = "spectral-flow"
CLOSED_FORM_LOOPS = 64
CLOSED_FORM_TOLERANCE = 1e-8


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.spectral_flow
    tol = config.tolerances
    sp = config.spectral
    settings = config.mc_settings(n_samples=cfg.n_samples)
    T = cfg.T
    report = new_report(NAME, config)
    dump: list[dict] = []

    for m in cfg.windings:
        g = config.gauge_map([m])
        expected = g.total_winding()

        flow = spectral_flow(g, steps=sp.flow_steps, cutoff=sp.cutoff)
        report.add(CheckResult(f"m={m}.eigen_tracking", flow == expected, flow, expected))

        getzler = getzler_flow_integral(g, T, sp.s_nodes, sp.cutoff, sp.tail_tolerance)
        report.add(close_check(f"m={m}.getzler_integral", getzler, expected, tol.flow, T=T))

        sampler = WienerSampler(g.base, T, settings.grid, settings.seed)
        loops = sampler.draw(stream(settings.seed, 0), CLOSED_FORM_LOOPS)
        quadrature = bch_odd_q(loops, g, T, sp.s_nodes)
        closed = bch_odd_closed_form(loops, g)
        report.add(
            close_check(
                f"m={m}.closed_form", float(np.abs(quadrature - closed).max()), 0.0,
                CLOSED_FORM_TOLERANCE,
            )
        )

        estimate = integrate_bch_odd(g, T, settings, sp.s_nodes)
        scale = math.sqrt(T / (2 * math.pi))
        measured_flow = flow_from_integral(estimate.value, g.base.dim, T)
        report.estimates[f"m={m}"] = {
            "mc": estimate,
            "flow": flow,
            "getzler": getzler,
            "expected_integral": integral_from_flow(flow, g.base.dim, T),
        }
        report.add(
            stderr_check(
                f"m={m}.mc_flow", measured_flow, expected, estimate.stderr * scale, tol.stderr_k,
                T=T,
            )
        )

        s_values = np.linspace(0.0, 1.0, cfg.dump_points)
        spectra = ((float(s), dirac_spectrum(g.base, g, sp.cutoff, float(s))) for s in s_values)
        dump += [{"winding": m, **row} for row in eigen_dump_rows(spectra, cfg.dump_window)]
        logger.info("spectral flow m=%d: tracked %d, getzler %.6f, mc %s", m, flow, getzler,
                    measured_flow)

    report.tables["eigenvalues"] = dump
    return report
