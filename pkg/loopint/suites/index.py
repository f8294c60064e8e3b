"""Three-way check of the even character on flux tori.

The heat supertrace of the twisted Dirac operator is T-independent and equals
the index; the Peierls lattice confirms the lowest Landau level has |k|
states; Monte Carlo integration of the even character reproduces i^{n/2} ind.
"""

from __future__ import annotations

import logging

import numpy as np

from loopint.bismut import bch_even_q, bch_even_series, integrate_bch_even
from loopint.config import ExperimentConfig
from loopint.phases import integral_from_index
from loopint.report import CheckResult, SuiteReport
from loopint.spectral import dirac_spectrum, heat_supertrace, magnetic_ground_multiplicity
from loopint.suites.base import close_check, new_report, stderr_check
from loopint.wiener import WienerSampler, stream

logger = logging.getLogger(__name__)

NAME = "index"
SERIES_LOOPS = 16


def _rectangular(lattice: np.ndarray) -> bool:
    return lattice.shape == (2, 2) and np.allclose(lattice, np.diag(np.diag(lattice)))


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.index
    tol = config.tolerances
    torus = config.torus()
    n = torus.dim
    settings = config.mc_settings(n_samples=cfg.n_samples)
    report = new_report(NAME, config)

    for k in cfg.fluxes:
        bundle = config.twist_bundle([k])
        expected_index = float(-k * bundle.superdimension())
        spec = dirac_spectrum(torus, bundle, config.spectral.landau_levels)

        values = [heat_supertrace(spec, T, tail_tolerance=tol.spectral) for T in config.T_values]
        for T, value in zip(config.T_values, values, strict=True):
            report.add(close_check(f"k={k}.supertrace[T={T}]", value, expected_index, tol.spectral))
        spread = max(values) - min(values)
        report.add(close_check(f"k={k}.t_independence", spread, 0.0, tol.spectral))

        if k != 0 and _rectangular(torus.lattice):
            count = magnetic_ground_multiplicity(torus, k)
            report.add(CheckResult(f"k={k}.landau_multiplicity", count == abs(k), count, abs(k)))

        sampler = WienerSampler(torus, cfg.T, settings.grid, settings.seed)
        loops = sampler.draw(stream(settings.seed, 0), SERIES_LOOPS)
        series = bch_even_series(loops, bundle, cfg.T, cfg.series_order)
        exact = bch_even_q(loops, bundle, cfg.T, splitting=settings.splitting)
        other = "midpoint" if settings.splitting == "strang" else "strang"
        drift = float(np.abs(bch_even_q(loops, bundle, cfg.T, splitting=other) - exact).max())
        report.add(close_check(f"k={k}.splitting", drift, 0.0, tol.spectral))
        truncation = float(np.abs(series.value - exact).max())
        report.add(
            CheckResult(
                f"k={k}.series_tail", truncation <= series.tail + tol.exact, truncation, 0.0,
                series.tail + tol.exact, {"order": cfg.series_order},
            )
        )

        expected = integral_from_index(expected_index, n)
        estimate = integrate_bch_even(bundle, cfg.T, settings)
        report.estimates[f"k={k}"] = {"mc": estimate, "index": expected_index, "expected": expected}
        report.add(
            stderr_check(
                f"k={k}.mc_integral", estimate.value, expected, estimate.stderr, tol.stderr_k,
                T=cfg.T,
            )
        )
        logger.info("index k=%d: spectral %s, mc %s +- %.3g", k, values[0], estimate.value,
                    estimate.stderr)
    return report
