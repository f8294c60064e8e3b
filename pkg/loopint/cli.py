"""loopint CLI: Typer entry point with Rich formatting."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated, Any

import typer
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from loopint.audit import read_run_events
from loopint.config import ExperimentConfig, apply_env_overrides, load_config, with_overrides
from loopint.errors import ConfigError
from loopint.report import SuiteReport, to_jsonable
from loopint.runner import run_suite

app = typer.Typer(
    name="loopint",
    help="loopint: loop-space integrals on flat tori, checked against spectral oracles.",
    no_args_is_help=True,
)
console = Console()

_DEFAULT_CONFIG = Path("experiment.yaml")
_DEFAULT_OUT = Path("reports")
MAX_TABLE_ROWS = 40

ConfigOption = Annotated[
    Path,
    typer.Option("--config", "-c", help="Path to experiment.yaml"),
]
OutOption = Annotated[
    Path | None,
    typer.Option("--out", "-o", help="Report directory (overrides output.dir)"),
]
SeedOption = Annotated[
    int | None,
    typer.Option("--seed", help="Monte Carlo seed override"),
]
WorkersOption = Annotated[
    int | None,
    typer.Option("--workers", "-w", help="Number of sampling worker threads"),
]
VerboseOption = Annotated[
    bool,
    typer.Option("--verbose", "-v", help="Log debug output"),
]


def _configure_logging(verbose: bool) -> None:
    """Attach a RichHandler to the package logger."""
    logger = logging.getLogger("loopint")
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=console, show_path=False))


def _load(
    config_path: Path, out: Path | None, seed: int | None, workers: int | None
) -> ExperimentConfig:
    """Load a config with file < environment < flag precedence; exit 2 on failure."""
    try:
        config = apply_env_overrides(load_config(config_path))
        return with_overrides(config, seed=seed, workers=workers, out=out)
    except (FileNotFoundError, ConfigError) as exc:
        console.print(Panel(str(exc), title="[red]config error[/red]", border_style="red"))
        raise typer.Exit(code=ConfigError.exit_code) from exc


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, complex):
        return f"{value.real:.6g}{value.imag:+.6g}j"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)[:40]


def _checks_table(report: SuiteReport, failures_only: bool) -> Table:
    table = Table(title=f"{report.suite} checks")
    table.add_column("Check", style="cyan")
    table.add_column("Status")
    table.add_column("Value")
    table.add_column("Expected")
    table.add_column("Tolerance")
    for check in report.checks:
        if failures_only and check.passed:
            continue
        status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(
            check.name, status, _fmt(check.value), _fmt(check.expected), _fmt(check.tolerance)
        )
    return table


def _run_and_display(
    suite: str,
    config_path: Path,
    out: Path | None,
    seed: int | None,
    workers: int | None,
    verbose: bool,
) -> None:
    """Load the config, run a suite, and display the result."""
    _configure_logging(verbose)
    config = _load(config_path, out, seed, workers)
    result = run_suite(config, suite)

    if result.report is not None and result.report.checks:
        crowded = len(result.report.checks) > MAX_TABLE_ROWS
        console.print(_checks_table(result.report, failures_only=crowded and not verbose))
    body = result.message
    if result.report_files:
        body += "\n" + "\n".join(f"  {path}" for path in result.report_files)
    if result.ok:
        console.print(Panel(body, title=f"[green]{suite}[/green]", border_style="green"))
    else:
        console.print(Panel(body, title=f"[red]{suite}[/red]", border_style="red"))
        raise typer.Exit(code=result.exit_code)


# ---------------------------------------------------------------------------
# Suite commands
# ---------------------------------------------------------------------------


@app.command()
def invariants(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Clifford, block-decomposition and q-functional property checks."""
    _run_and_display("invariants", config, out, seed, workers, verbose)


@app.command(name="wiener-checks")
def wiener_checks(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Heat kernel, Wiener measure and Feynman-Kac checks."""
    _run_and_display("wiener-checks", config, out, seed, workers, verbose)


@app.command()
def compare(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Monte Carlo against spectral evaluation of the integral map."""
    _run_and_display("compare", config, out, seed, workers, verbose)


@app.command()
def index(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Even character on flux tori: supertrace, Landau levels and Monte Carlo."""
    _run_and_display("index", config, out, seed, workers, verbose)


@app.command(name="spectral-flow")
def spectral_flow(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Odd character on the circle: tracking, heat integral and Monte Carlo."""
    _run_and_display("spectral-flow", config, out, seed, workers, verbose)


@app.command()
def localization(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Localization to constant loops and the fibre-integration checks."""
    _run_and_display("localization", config, out, seed, workers, verbose)


@app.command()
def refine(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Polygon refinement sweep of the even character."""
    _run_and_display("refine", config, out, seed, workers, verbose)


@app.command(name="zeta-toy")
def zeta_toy(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Zeta determinant of d/dt with holonomy against the spin-lift supertrace."""
    _run_and_display("zeta-toy", config, out, seed, workers, verbose)


# ---------------------------------------------------------------------------
# Inspection commands
# ---------------------------------------------------------------------------


@app.command()
def history(
    out: Annotated[Path, typer.Option("--out", "-o", help="Report directory")] = _DEFAULT_OUT,
    count: Annotated[int, typer.Option("--count", "-n", help="Number of entries")] = 20,
    suite: Annotated[str | None, typer.Option("--suite", "-s", help="Only this suite")] = None,
) -> None:
    """Show recent suite runs."""
    entries = read_run_events(out, last_n=count, suite=suite)

    if not entries:
        console.print("[dim]No runs recorded.[/dim]")
        return

    table = Table(title="Runs (most recent first)")
    table.add_column("Timestamp", style="cyan", no_wrap=True)
    table.add_column("Suite", style="magenta")
    table.add_column("Status")
    table.add_column("Seed")
    table.add_column("Config", style="dim")
    table.add_column("Time", justify="right")
    table.add_column("Detail", max_width=60)

    for entry in entries:
        status = entry.get("status", "?")
        style = "green" if status == "ok" else "red"
        seconds = entry.get("seconds")
        table.add_row(
            entry.get("timestamp", "?")[:19],
            entry.get("suite", "?"),
            f"[{style}]{status}[/{style}]",
            str(entry.get("seed", "")),
            entry.get("config_digest", ""),
            "" if seconds is None else f"{seconds:.1f}s",
            entry.get("detail", "")[:60],
        )

    console.print(table)


@app.command(name="show-config")
def show_config(
    config: ConfigOption = _DEFAULT_CONFIG,
    out: OutOption = None,
    seed: SeedOption = None,
    workers: WorkersOption = None,
    full: Annotated[bool, typer.Option("--full", help="Dump the resolved config")] = False,
) -> None:
    """Display the resolved experiment settings."""
    cfg = _load(config, out, seed, workers)

    if full:
        console.print(yaml.safe_dump(to_jsonable(cfg.resolved_dict()), sort_keys=True))
        return

    mc = cfg.monte_carlo
    sp = cfg.spectral
    table = Table(title="loopint experiment")
    table.add_column("Setting", style="cyan")
    table.add_column("Value")

    table.add_row("Torus", f"dim {cfg.backend.dim}, spin {cfg.backend.spin_structure}")
    table.add_row("Lattice", str(cfg.torus().lattice.tolist()))
    table.add_row("Fluxes", str(cfg.bundle.fluxes))
    table.add_row("Windings", str(cfg.gauge.windings))
    table.add_row("T values", ", ".join(str(T) for T in cfg.T_values))
    table.add_row("Samples", f"{mc.n_samples} on grid {mc.grid}")
    table.add_row("Seed", str(mc.seed))
    table.add_row("Workers", str(mc.workers))
    table.add_row("Fourier cutoff", f"{sp.cutoff} (check {sp.cutoff_check})")
    table.add_row("Landau levels", str(sp.landau_levels))
    table.add_row("Named forms", ", ".join(cfg.forms) or "(none)")
    table.add_row("Report directory", cfg.output.dir)

    console.print(table)
