"""Suite executor: runs a registered suite, writes its reports and the run ledger."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from loopint.audit import RunEvent, config_digest, write_run_event
from loopint.config import ExperimentConfig
from loopint.errors import LoopIntError, ToleranceFailure
from loopint.report import SuiteReport, write_reports
from loopint.suites.base import SuiteProtocol

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """Result of a suite execution."""

    ok: bool
    message: str
    report_files: list[str] = field(default_factory=list)
    exit_code: int = 0
    report: SuiteReport | None = None


# Suite registry: maps command names to their run functions.
# Populated on first use by _register_builtins().
_SUITE_REGISTRY: dict[str, SuiteProtocol] = {}


def _register_builtins() -> None:
    """Lazily import and register all built-in suites."""
    if _SUITE_REGISTRY:
        return

    from loopint.suites import (
        compare,
        index,
        invariants,
        localization,
        refine,
        spectral_flow,
        wiener_checks,
        zeta_toy,
    )

    _SUITE_REGISTRY.update(
        {
            "invariants": invariants.run,
            "wiener-checks": wiener_checks.run,
            "compare": compare.run,
            "index": index.run,
            "spectral-flow": spectral_flow.run,
            "localization": localization.run,
            "refine": refine.run,
            "zeta-toy": zeta_toy.run,
        }
    )


def get_registry() -> dict[str, SuiteProtocol]:
    """Return the suite registry, initialising if needed."""
    _register_builtins()
    return _SUITE_REGISTRY


def run_suite(config: ExperimentConfig, name: str, out_dir: Path | str | None = None) -> RunResult:
    """Run one suite and write its reports.

    Reports are written only once the suite finished; an exception leaves no
    report files behind, only a ledger entry.

    Args:
        config: The resolved experiment config.
        name: Registered suite name, e.g. ``"index"``.
        out_dir: Report directory; defaults to ``config.output.dir``.

    Returns:
        A RunResult with exit code 0 (pass), 3 (tolerance or numerical
        failure) or 4 (oracle unavailable).
    """
    out = Path(out_dir if out_dir is not None else config.output.dir)
    digest = config_digest(config.resolved_dict())
    started = time.perf_counter()

    def record(status: str, detail: str, files: list[str] | None = None) -> None:
        event = RunEvent(
            suite=name,
            status=status,
            detail=detail,
            report_files=files or [],
            seed=config.monte_carlo.seed,
            config_digest=digest,
            seconds=time.perf_counter() - started,
        )
        write_run_event(out, event)

    registry = get_registry()
    if name not in registry:
        msg = f"Suite '{name}' is not registered"
        record("error", msg)
        return RunResult(ok=False, message=msg, exit_code=2)

    # --- Execute suite ---
    try:
        report = registry[name](config)
    except LoopIntError as exc:
        code = exc.exit_code if exc.exit_code != 1 else 3
        msg = f"Suite '{name}' failed: {type(exc).__name__}: {exc}"
        logger.warning(msg)
        record("error", msg)
        return RunResult(ok=False, message=msg, exit_code=code)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        msg = f"Suite '{name}' raised a numerical error: {exc}"
        logger.warning(msg)
        record("error", msg)
        return RunResult(ok=False, message=msg, exit_code=ToleranceFailure.exit_code)

    files = write_reports(report, out)
    failures = report.failures()
    if failures:
        names = ", ".join(c.name for c in failures[:5])
        msg = f"{len(failures)} of {len(report.checks)} checks failed: {names}"
        status, code = "fail", ToleranceFailure.exit_code
    else:
        msg = f"all {len(report.checks)} checks passed"
        status, code = "ok", 0
    record(status, msg, files)
    return RunResult(
        ok=not failures, message=msg, report_files=files, exit_code=code, report=report
    )
