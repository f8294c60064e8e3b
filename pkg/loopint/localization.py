"""Constant-loop side of the localization identities.

For the even character, I_T[BCh_T(V)] = (2 pi T)^{-n/2} int_X [A(T) ^ ch_T(V)]_top,
and for the odd one, I_T[BCh_T(g)] = (2 pi T)^{-1/2} int_X [A(T) ^ ch_T(g)]_top.
A(T) is computed from the Riemann tensor through the power series of
log(x / sinh x); on flat tori it is identically 1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from loopint.bismut import integrate_bch_even, integrate_bch_odd
from loopint.bundles import GaugeMap, TwistBundle, chern_character_form, odd_chern_character
from loopint.clifford import CliffordElement, exterior_product_arrays, mask_of
from loopint.errors import UnsupportedBackendError
from loopint.fields import FormField
from loopint.geometry import FlatTorus
from loopint.integrator import MCSettings
from loopint.phases import integral_from_flow
from loopint.spectral import (
    dirac_spectrum,
    getzler_flow_integral,
    heat_supertrace,
    spectral_flow,
)
from loopint.wiener import Estimate

logger = logging.getLogger(__name__)

SPECTRAL_RHS_TOLERANCE = 1e-8

# ---------------------------------------------------------------------------
# Characteristic forms
# ---------------------------------------------------------------------------


def _form_matmul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    # matrices of forms (r, r, 2^n)
    return exterior_product_arrays(a[:, :, None, :], b[None, :, :, :], n).sum(axis=1)


def _form_exp(alpha: np.ndarray, n: int) -> np.ndarray:
    """exp of a form without scalar part; the series stops at degree n."""
    out = np.zeros_like(alpha)
    out[0] = 1.0
    term = out.copy()
    for k in range(1, n + 1):
        term = exterior_product_arrays(term, alpha, n) / k
        if not np.any(term):
            break
        out = out + term
    return out


def log_x_over_sinh_coefficients(order: int) -> np.ndarray:
    """c_k with log(x / sinh x) = sum_k c_k x^{2k}, k = 0..order."""
    bern = scipy.special.bernoulli(2 * order)
    coeffs = np.zeros(order + 1)
    for k in range(1, order + 1):
        coeffs[k] = -(2 ** (2 * k)) * bern[2 * k] / (2 * k * math.factorial(2 * k))
    return coeffs


def curvature_forms(riemann: np.ndarray) -> np.ndarray:
    """R_ij = sum_{k<l} R_ijkl dx^k ^ dx^l as a matrix of 2-forms (n, n, 2^n)."""
    n = riemann.shape[0]
    out = np.zeros((n, n, 1 << n), dtype=np.complex128)
    for k in range(n):
        for j in range(k + 1, n):
            out[:, :, mask_of((k + 1, j + 1))] = riemann[:, :, k, j]
    return out


def a_hat_series(x: np.ndarray, order: int = 6) -> np.ndarray:
    """det^{1/2}(X / sinh X) = exp(1/2 sum_k c_k tr X^{2k}) for a matrix of 2-forms X.

    Args:
        x: Array (r, r, 2^n) of exterior coefficients.
        order: Highest power of X^2 kept; terms beyond degree n vanish anyway.

    Returns:
        Exterior coefficients (2^n,).
    """
    size = x.shape[-1]
    n = size.bit_length() - 1
    coeffs = log_x_over_sinh_coefficients(order)
    square = _form_matmul(x, x, n)
    power = square
    log_det = np.zeros(size, dtype=np.complex128)
    for k in range(1, order + 1):
        log_det += coeffs[k] * np.einsum("iik->k", power)
        if 4 * (k + 1) > n:
            # higher powers have degree > n
            break
        power = _form_matmul(power, square, n)
    return _form_exp(log_det / 2, n)


def a_hat_form(torus: FlatTorus, T: float, order: int = 6) -> CliffordElement:
    """A(T) = det^{1/2}((R/2T) / sinh(R/2T)); identically 1 on flat tori."""
    x = curvature_forms(torus.riemann()) / (2 * T)
    return CliffordElement(torus.dim, a_hat_series(x, order))


# ---------------------------------------------------------------------------
# Integrals over constant loops
# ---------------------------------------------------------------------------


def _top_integral(torus: FlatTorus, form: Callable[[np.ndarray], np.ndarray], grid: int) -> complex:
    """int_X of the top coefficient by uniform lattice quadrature."""
    points, weight = torus.quadrature_grid(grid)
    top = (1 << torus.dim) - 1
    values = np.array([form(x)[top] for x in points])
    return complex(weight * values.sum())


def localized_rhs_even(bundle: TwistBundle, T: float, grid: int = 64) -> complex:
    """(2 pi T)^{-n/2} int_X [A(T) ^ ch_T(V)]_top."""
    torus = bundle.base
    n = torus.dim
    if n % 2:
        raise UnsupportedBackendError("the even right-hand side needs an even-dimensional base")
    integrand = exterior_product_arrays(
        a_hat_form(torus, T).coeffs, chern_character_form(bundle, T).coeffs, n
    )
    value = _top_integral(torus, lambda x: integrand, grid)
    return value * (2 * math.pi * T) ** (-n / 2)


def localized_rhs_odd(g: GaugeMap, T: float, grid: int = 64) -> complex:
    """(2 pi T)^{-1/2} int_X [A(T) ^ ch_T(g)]_top, i.e. sqrt(2 pi / T) i m on the circle."""
    torus = g.base
    n = torus.dim
    integrand = exterior_product_arrays(
        a_hat_form(torus, T).coeffs, odd_chern_character(g, T).coeffs, n
    )
    value = _top_integral(torus, lambda x: integrand, grid)
    return value * (2 * math.pi * T) ** (-n / 2)


def closedness_defect(
    form: FormField | CliffordElement | Callable[[np.ndarray], np.ndarray],
    torus: FlatTorus,
    h: float = 1e-4,
    grid: int = 8,
) -> float:
    """max over a grid of |d form| with central differences of step h."""
    n = torus.dim
    if isinstance(form, CliffordElement):
        coeffs = form.coeffs

        def field_at(x: np.ndarray) -> np.ndarray:
            return coeffs

    elif isinstance(form, FormField):

        def field_at(x: np.ndarray) -> np.ndarray:
            return form.coefficients(torus.to_unit(x))

    else:
        field_at = form
    points, _ = torus.quadrature_grid(grid)
    worst = 0.0
    for x in points:
        d = np.zeros(1 << n, dtype=np.complex128)
        for i in range(n):
            step = np.zeros(n)
            step[i] = h
            partial = (np.asarray(field_at(x + step)) - np.asarray(field_at(x - step))) / (2 * h)
            e_i = np.zeros(1 << n)
            e_i[1 << i] = 1.0
            d += exterior_product_arrays(e_i, partial, n)
        worst = max(worst, float(np.abs(d).max()))
    return worst


# ---------------------------------------------------------------------------
# Three-way comparison
# ---------------------------------------------------------------------------


@dataclass
class LocalizationReport:
    """Monte Carlo, spectral and localized values of one character at one T."""

    kind: str
    T: float
    mc: Estimate | None
    spectral: complex
    rhs: complex
    extra: dict = field(default_factory=dict)
    k: float = 3.0
    floor: float = 1e-12

    @property
    def spectral_ok(self) -> bool:
        return abs(self.spectral - self.rhs) <= SPECTRAL_RHS_TOLERANCE

    @property
    def mc_ok(self) -> bool:
        return self.mc is None or self.mc.within(self.spectral, self.k, self.floor)

    @property
    def passed(self) -> bool:
        return self.spectral_ok and self.mc_ok

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.T,
            "mc": None if self.mc is None else self.mc.to_dict(),
            "spectral": self.spectral,
            "rhs": self.rhs,
            "spectral_ok": self.spectral_ok,
            "mc_ok": self.mc_ok,
            "passed": self.passed,
            **self.extra,
        }


def localization_check_even(
    bundle: TwistBundle,
    T: float,
    settings: MCSettings | None = MCSettings(),
    cutoff: int = 40,
) -> LocalizationReport:
    """I_T[BCh_T(V)] by Monte Carlo, i^{n/2} ind(D_V) spectrally, and the localized integral."""
    spectral = heat_supertrace(dirac_spectrum(bundle.base, bundle, cutoff), T, dictionary=True)
    rhs = localized_rhs_even(bundle, T)
    mc = None if settings is None else integrate_bch_even(bundle, T, settings)
    report = LocalizationReport("even", T, mc, spectral, rhs, {"fluxes": list(bundle.fluxes)})
    logger.info(
        "even localization T=%g: spectral %s, rhs %s, passed=%s", T, spectral, rhs, report.passed
    )
    return report


def localization_check_odd(
    g: GaugeMap,
    T: float,
    settings: MCSettings | None = MCSettings(),
    cutoff: int = 24,
    s_nodes: int = 64,
) -> LocalizationReport:
    """I_T[BCh_T(g)] by Monte Carlo, from the spectral flow, and the localized integral."""
    n = g.base.dim
    flow = spectral_flow(g, cutoff=cutoff)
    getzler = getzler_flow_integral(g, T, s_nodes, cutoff)
    spectral = integral_from_flow(flow, n, T)
    rhs = localized_rhs_odd(g, T)
    mc = None if settings is None else integrate_bch_odd(g, T, settings, s_nodes)
    extra = {"windings": list(g.windings), "spectral_flow": flow, "getzler": getzler}
    report = LocalizationReport("odd", T, mc, spectral, rhs, extra)
    logger.info("odd localization T=%g: sf %d, rhs %s, passed=%s", T, flow, rhs, report.passed)
    return report


def localization_check(
    twist: TwistBundle | GaugeMap,
    T: float,
    settings: MCSettings | None = MCSettings(),
) -> LocalizationReport:
    """Dispatch on the kind of twist."""
    if isinstance(twist, GaugeMap):
        return localization_check_odd(twist, T, settings)
    return localization_check_even(twist, T, settings)
