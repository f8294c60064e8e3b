"""Monte Carlo I_T against the spectral operator-product evaluation on untwisted tori."""

from __future__ import annotations

import logging

from loopint.config import ExperimentConfig
from loopint.errors import UnsupportedBackendError
from loopint.fields import FormField, TrigPolynomial
from loopint.integrator import integrate_mc, integrate_spectral
from loopint.loopforms import Density, IntegralForm, insert_at, lift_form
from loopint.report import SuiteReport
from loopint.suites.base import close_check, new_report, stderr_check

logger = logging.getLogger(__name__)

NAME = "compare"


def default_forms(n: int) -> dict[str, IntegralForm]:
    """Forms with up to three factors mixing point masses and densities, degrees 0 to 2."""
    if n < 2:
        raise UnsupportedBackendError("the default comparison forms need dimension >= 2")
    dx1 = FormField.constant(n, (1,))
    dx2 = FormField.constant(n, (2,))
    area = FormField.constant(n, (1, 2))
    wave = TrigPolynomial.cosine((1,) + (0,) * (n - 1))
    ripple = TrigPolynomial.sine((0, 1) + (0,) * (n - 2))
    breathing = Density(poly=TrigPolynomial.constant(1) + TrigPolynomial.cosine((1,), 0.5))
    uniform = Density.constant()
    return {
        "area_insert": insert_at(0.0, area),
        "two_inserts": insert_at(0.5, dx2) ^ insert_at(0.0, dx1),
        "lifted_area_wave": lift_form(uniform, FormField(n, 2, {0b11: wave})),
        "density_and_insert": lift_form(breathing, dx1) ^ insert_at(0.25, dx2),
        "three_factors": insert_at(0.75, FormField.function(wave))
        ^ insert_at(0.25, dx2)
        ^ lift_form(uniform, dx1),
        "rippled_inserts": insert_at(0.5, FormField(n, 1, {0b10: wave}))
        ^ insert_at(0.0, FormField(n, 1, {0b01: ripple + TrigPolynomial.constant(n, 1.0)})),
        "scalar_unit": IntegralForm.unit(n),
    }


def run(config: ExperimentConfig) -> SuiteReport:
    cfg = config.suites.compare
    tol = config.tolerances
    torus = config.torus()
    report = new_report(NAME, config)

    forms = (
        {name: config.build_form(config.forms[name]) for name in cfg.forms}
        if cfg.forms
        else default_forms(torus.dim)
    )
    settings = config.mc_settings()
    fine = config.spectral_settings()
    coarse = config.spectral_settings(config.spectral.cutoff_check)

    for name, theta in forms.items():
        spectral = integrate_spectral(theta, cfg.T, torus, fine)
        check = integrate_spectral(theta, cfg.T, torus, coarse)
        report.add(
            close_check(
                f"{name}.cutoff_stability", check, spectral, tol.cutoff,
                cutoffs=[coarse.cutoff, fine.cutoff],
            )
        )
        estimate = integrate_mc(theta, cfg.T, torus, settings)
        report.estimates[name] = {"mc": estimate, "spectral": spectral}
        report.add(
            stderr_check(
                f"{name}.mc_vs_spectral", estimate.value, spectral, estimate.stderr,
                tol.stderr_k, T=cfg.T,
            )
        )
        logger.info("compare %s: mc %s +- %.3g, spectral %s", name, estimate.value,
                    estimate.stderr, spectral)
    return report
