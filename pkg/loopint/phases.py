"""Powers of i relating real Cl_n-linear traces to complex ones.

Every comparison between an integral I_T, a complex supertrace and an integer
index or spectral flow goes through this table.

* Str_C = (-i)^{n/2} Str for even n, so I_T[BCh_T] = i^{n/2} ind.
* For odd n with e_1 acting as -i on the circle,
  I_T[BCh_T(g)] = i^{(n+1)/2} (2 pi / T)^{1/2} sf.
"""

from __future__ import annotations

import math

from loopint.errors import UnsupportedBackendError


def even_phase(n: int) -> complex:
    """i^{n/2}: factor from the complex index to the real integral."""
    if n % 2:
        raise UnsupportedBackendError(f"even phase requested for odd dimension {n}")
    return 1j ** (n // 2)


def odd_phase(n: int, T: float) -> complex:
    """i^{(n+1)/2} (2 pi / T)^{1/2}: factor from spectral flow to the real integral."""
    if n % 2 == 0:
        raise UnsupportedBackendError(f"odd phase requested for even dimension {n}")
    return 1j ** ((n + 1) // 2) * math.sqrt(2 * math.pi / T)


def complex_supertrace(real_supertrace: complex, n: int) -> complex:
    return (-1j) ** (n // 2) * real_supertrace


def index_from_integral(value: complex, n: int) -> complex:
    return value / even_phase(n)


def integral_from_index(index: complex, n: int) -> complex:
    return index * even_phase(n)


def flow_from_integral(value: complex, n: int, T: float) -> complex:
    return value / odd_phase(n, T)


def integral_from_flow(flow: complex, n: int, T: float) -> complex:
    return flow * odd_phase(n, T)


def describe(n: int, T: float | None = None) -> dict[str, str]:
    """Human-readable dictionary entries for reports."""
    if n % 2 == 0:
        return {"kind": "even", "factor": f"i^{n // 2}", "value": str(even_phase(n))}
    out = {"kind": "odd", "factor": f"i^{(n + 1) // 2} (2pi/T)^(1/2)"}
    if T is not None:
        out["value"] = str(odd_phase(n, T))
    return out
