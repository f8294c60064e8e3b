"""Suite interface definition.

Every loopint suite is a module in ``loopint/suites/`` that exposes a ``run``
function with the following signature::

    def run(config: ExperimentConfig) -> SuiteReport:
        '''Run all checks of the suite.

        Args:
            config: The fully resolved experiment config.

        Returns:
            A report whose checks decide the exit code.
        '''
        ...

To register a new suite:

1. Create a module in ``loopint/suites/`` with a ``run`` function.
2. Add the command name to the registry in ``loopint/runner.py`` inside
   ``_register_builtins()``.
3. Add a subcommand in ``loopint/cli.py``.
"""

from __future__ import annotations

from typing import Protocol

from loopint.config import ExperimentConfig
from loopint.report import CheckResult, SuiteReport


class SuiteProtocol(Protocol):
    """Structural type that all suites must satisfy."""

    def __call__(self, config: ExperimentConfig) -> SuiteReport: ...


def new_report(name: str, config: ExperimentConfig) -> SuiteReport:
    return SuiteReport(suite=name, config=config.resolved_dict())


def close_check(
    name: str,
    value: complex,
    expected: complex,
    tolerance: float,
    **detail: object,
) -> CheckResult:
    """Absolute-difference check ``|value - expected| <= tolerance``."""
    deviation = abs(complex(value) - complex(expected))
    return CheckResult(
        name,
        bool(deviation <= tolerance),
        value,
        expected,
        tolerance,
        {"deviation": deviation, **detail},
    )


def stderr_check(
    name: str,
    value: complex,
    expected: complex,
    stderr: float,
    k: float = 3.0,
    floor: float = 1e-12,
    **detail: object,
) -> CheckResult:
    """Monte Carlo check ``|value - expected| <= k * stderr + floor``."""
    deviation = abs(complex(value) - complex(expected))
    tolerance = k * stderr + floor
    return CheckResult(
        name,
        bool(deviation <= tolerance),
        value,
        expected,
        tolerance,
        {"deviation": deviation, "stderr": stderr, "k": k, **detail},
    )
