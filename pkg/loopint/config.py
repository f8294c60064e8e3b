"""Experiment configuration: loads and validates experiment.yaml with Pydantic.

The document is YAML (JSON files load too). Unknown keys are rejected at
every level. Form fields, time profiles and form expressions are named so
suites can refer to them; every expression is built once at load time, so a
malformed expression fails before any suite runs.
"""

from __future__ import annotations

import os
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.linalg
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from loopint.bundles import FluxLine, GaugeMap, TwistBundle
from loopint.clifford import mask_of
from loopint.errors import ConfigError, LoopIntError
from loopint.fields import FormField, TrigPolynomial
from loopint.geometry import FlatTorus
from loopint.integrator import MCSettings, SpectralSettings
from loopint.loopforms import (
    Density,
    IntegralForm,
    average,
    insert_at,
    lift_form,
    rotate,
    wedge_all,
)

ENV_PREFIX = "LOOPINT_"


def _as_pair(v: object) -> object:
    """Accept a real number or [re, im] for complex coefficients."""
    if isinstance(v, int | float):
        return (float(v), 0.0)
    return v


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Geometry and twists
# ---------------------------------------------------------------------------


class BackendConfig(_Strict):
    """Flat torus R^n / L Z^n with a spin structure."""

    dim: int = 2
    lattice: list[list[float]] | None = None
    spin_structure: list[int] = []

    @field_validator("lattice", mode="before")
    @classmethod
    def _square_lattice(cls, v: object) -> object:
        """A number means a scaled identity, a flat list a diagonal."""
        if v is None or isinstance(v, list) and v and isinstance(v[0], list):
            return v
        if isinstance(v, int | float):
            return [[float(v)]]
        if isinstance(v, list):
            return np.diag(np.asarray(v, dtype=float)).tolist()
        return v

    @field_validator("spin_structure", mode="before")
    @classmethod
    def _binary_spin(cls, v: list[int]) -> list[int]:
        return [int(e) % 2 for e in v]

    @model_validator(mode="after")
    def _consistent(self) -> BackendConfig:
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.lattice is not None:
            if len(self.lattice) == 1 and len(self.lattice[0]) == 1 and self.dim > 1:
                self.lattice = (np.eye(self.dim) * self.lattice[0][0]).tolist()
            if any(len(row) != self.dim for row in self.lattice) or len(self.lattice) != self.dim:
                raise ValueError(f"lattice must be {self.dim} x {self.dim}")
        if self.spin_structure and len(self.spin_structure) != self.dim:
            raise ValueError(f"spin_structure needs {self.dim} entries")
        return self


class BundleConfig(_Strict):
    """Direct sum of flux lines, optionally seen through a real rotation frame."""

    fluxes: list[int] = [1]
    parities: list[int] = []
    frame_angle: float | None = None

    @model_validator(mode="after")
    def _lengths(self) -> BundleConfig:
        if not self.fluxes:
            raise ValueError("a bundle needs at least one summand")
        if self.parities and len(self.parities) != len(self.fluxes):
            raise ValueError("parities must match fluxes")
        return self


class GaugeConfig(_Strict):
    windings: list[int] = [1]
    frame_angle: float | None = None


def _rotation_frame(angle: float | None, rank: int) -> np.ndarray | None:
    if angle is None or rank < 2:
        return None
    upper = np.triu(np.ones((rank, rank)), 1)
    return scipy.linalg.expm(angle * (upper - upper.T))


# ---------------------------------------------------------------------------
# Forms
# ---------------------------------------------------------------------------


class FieldTerm(_Strict):
    """One term c * basis(2 pi freq . u) dx^indices of a form field."""

    indices: list[int] = []
    freq: list[int] = []
    kind: Literal["exp", "cos", "sin"] = "exp"
    coeff: tuple[float, float] = (1.0, 0.0)

    @field_validator("coeff", mode="before")
    @classmethod
    def _complex_coeff(cls, v: object) -> object:
        return _as_pair(v)


class FieldConfig(_Strict):
    terms: list[FieldTerm]


class DensityTerm(_Strict):
    freq: int = 0
    kind: Literal["exp", "cos", "sin"] = "exp"
    coeff: tuple[float, float] = (1.0, 0.0)

    @field_validator("coeff", mode="before")
    @classmethod
    def _complex_coeff(cls, v: object) -> object:
        return _as_pair(v)


class ProfileConfig(_Strict):
    """Either a point mass ``point: tau`` or a trig density ``density: [...]``."""

    point: float | None = None
    density: list[DensityTerm] | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> ProfileConfig:
        if (self.point is None) == (self.density is None):
            raise ValueError("a profile needs exactly one of point or density")
        return self


class InsertSpec(_Strict):
    field: str
    at: float


class LiftSpec(_Strict):
    field: str
    profile: str = "uniform"


class ScaleSpec(_Strict):
    factor: tuple[float, float]
    of: FormExpr

    @field_validator("factor", mode="before")
    @classmethod
    def _complex_factor(cls, v: object) -> object:
        return _as_pair(v)


class RotateSpec(_Strict):
    t: float
    of: FormExpr


class AverageSpec(_Strict):
    k: int
    of: FormExpr


class FormExpr(_Strict):
    """A form expression tree; exactly one key is set per node."""

    ref: str | None = None
    unit: tuple[float, float] | None = None
    insert: InsertSpec | None = None
    lift: LiftSpec | None = None
    wedge: list[FormExpr] | None = None
    sum: list[FormExpr] | None = None
    scale: ScaleSpec | None = None
    rotate: RotateSpec | None = None
    average: AverageSpec | None = None

    @field_validator("unit", mode="before")
    @classmethod
    def _complex_unit(cls, v: object) -> object:
        return None if v is None else _as_pair(v)

    @model_validator(mode="after")
    def _one_operation(self) -> FormExpr:
        set_keys = [k for k in type(self).model_fields if getattr(self, k) is not None]
        if len(set_keys) != 1:
            raise ValueError(f"a form expression needs exactly one operation, got {set_keys}")
        return self


ScaleSpec.model_rebuild()
RotateSpec.model_rebuild()
AverageSpec.model_rebuild()
FormExpr.model_rebuild()


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------


class MonteCarloConfig(_Strict):
    n_samples: int = 100_000
    grid: int = 16
    seed: int = 7
    workers: int = 1
    chunk_size: int = 4096
    clip: float | None = None
    splitting: Literal["midpoint", "strang"] = "strang"

    @field_validator("n_samples", "grid", "workers", "chunk_size")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v


class SpectralConfig(_Strict):
    cutoff: int = 24
    cutoff_check: int = 16
    landau_levels: int = 40
    gauss_nodes: int = 16
    s_nodes: int = 64
    flow_steps: int = 64
    tail_tolerance: float = 1e-10


class Tolerances(_Strict):
    stderr_k: float = 3.0
    exact: float = 1e-12
    spectral: float = 1e-8
    cutoff: float = 1e-8
    flow: float = 1e-3
    ratio: float = 0.2
    zeta: float = 1e-10


class InvariantsConfig(_Strict):
    random_cases: int = 1000
    block_forms: int = 100
    q_forms: int = 50
    seed: int = 11


class WienerChecksConfig(_Strict):
    n_samples: int = 100_000
    potential_amplitude: float = 0.5
    potential_freq: list[int] = [1, 0]
    galerkin_modes: int = 8


class CompareConfig(_Strict):
    forms: list[str] = []
    T: float = 1.0


class IndexConfig(_Strict):
    fluxes: list[int] = [-2, -1, 0, 1, 2]
    T: float = 1.0
    n_samples: int | None = None
    series_order: int = 6


class FlowConfig(_Strict):
    windings: list[int] = [-3, -2, -1, 0, 1, 2, 3]
    T: float = 1.0
    n_samples: int | None = None
    dump_points: int = 9
    dump_window: float | None = 20.0


class RefineConfig(_Strict):
    flux: int = 1
    grids: list[int] = [16, 32, 64, 128]
    T: float = 1.0


class ZetaConfig(_Strict):
    points: int = 32


class LocalizationConfig(_Strict):
    fluxes: list[int] = [-2, -1, 0, 1, 2]
    windings: list[int] = [-2, -1, 0, 1, 2]
    monte_carlo: bool = True
    n_samples: int | None = None


class AppendixConfig(_Strict):
    """Transport variation, relative map and fibre integration checks."""

    enabled: bool = True
    T: float = 1.0
    eps: float = 1e-3
    halvings: int = 3
    loops: int = 8
    relative_form: str | None = None
    fiber_field: str | None = None
    fiber_form: str | None = None
    quadrature_grid: int = 4
    rotations: int = 4
    n_samples: int | None = None


class SuitesConfig(_Strict):
    invariants: InvariantsConfig = InvariantsConfig()
    wiener_checks: WienerChecksConfig = WienerChecksConfig()
    compare: CompareConfig = CompareConfig()
    index: IndexConfig = IndexConfig()
    spectral_flow: FlowConfig = FlowConfig()
    localization: LocalizationConfig = LocalizationConfig()
    refine: RefineConfig = RefineConfig()
    zeta_toy: ZetaConfig = ZetaConfig()
    appendix: AppendixConfig = AppendixConfig()


class OutputConfig(_Strict):
    dir: str = "reports"


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


class ExperimentConfig(_Strict):
    """Everything a suite needs to run reproducibly."""

    backend: BackendConfig = BackendConfig()
    circle: BackendConfig = BackendConfig(dim=1)
    bundle: BundleConfig = BundleConfig()
    gauge: GaugeConfig = GaugeConfig()
    fields: dict[str, FieldConfig] = {}
    profiles: dict[str, ProfileConfig] = {}
    forms: dict[str, FormExpr] = {}
    T_values: list[float] = [0.5, 1.0, 2.0]
    monte_carlo: MonteCarloConfig = MonteCarloConfig()
    spectral: SpectralConfig = SpectralConfig()
    tolerances: Tolerances = Tolerances()
    suites: SuitesConfig = SuitesConfig()
    output: OutputConfig = OutputConfig()

    @field_validator("T_values", mode="before")
    @classmethod
    def _deduplicate_times(cls, v: list[float]) -> list[float]:
        """Remove duplicate T values while preserving order."""
        seen: set[float] = set()
        result: list[float] = []
        for t in v:
            t = float(t)
            if t <= 0:
                raise ValueError("T values must be positive")
            if t not in seen:
                seen.add(t)
                result.append(t)
        return result

    @model_validator(mode="after")
    def _build_forms(self) -> ExperimentConfig:
        for name in self.suites.compare.forms:
            if name not in self.forms:
                raise ValueError(f"compare suite refers to unknown form {name!r}")
        try:
            self.build_forms()
        except LoopIntError as exc:
            raise ValueError(str(exc)) from exc
        return self

    # -- builders -----------------------------------------------------------

    def torus(self) -> FlatTorus:
        return _torus(self.backend)

    def circle_torus(self) -> FlatTorus:
        return _torus(self.circle)

    def twist_bundle(self, fluxes: list[int] | None = None) -> TwistBundle:
        cfg = self.bundle
        fluxes = cfg.fluxes if fluxes is None else fluxes
        parities = cfg.parities
        if not parities or len(parities) != len(fluxes):
            parities = [0] * len(fluxes)
        summands = tuple(FluxLine(k, p) for k, p in zip(fluxes, parities, strict=True))
        return TwistBundle(self.torus(), summands, _rotation_frame(cfg.frame_angle, len(summands)))

    def gauge_map(self, windings: list[int] | None = None) -> GaugeMap:
        windings = self.gauge.windings if windings is None else windings
        frame = _rotation_frame(self.gauge.frame_angle, len(windings))
        return GaugeMap(self.circle_torus(), tuple(windings), frame)

    def mc_settings(self, n_samples: int | None = None, grid: int | None = None) -> MCSettings:
        mc = self.monte_carlo
        return MCSettings(
            n_samples or mc.n_samples,
            grid or mc.grid,
            mc.seed,
            mc.chunk_size,
            mc.workers,
            mc.clip,
            mc.splitting,
        )

    def spectral_settings(self, cutoff: int | None = None) -> SpectralSettings:
        sp = self.spectral
        return SpectralSettings(cutoff or sp.cutoff, sp.gauss_nodes, sp.tail_tolerance)

    def form_field(self, name: str) -> FormField:
        if name not in self.fields:
            raise ConfigError(f"unknown field {name!r}")
        return _field(self.fields[name], self.backend.dim)

    def profile(self, name: str) -> Density | float:
        if name == "uniform" and name not in self.profiles:
            return Density.constant()
        if name not in self.profiles:
            raise ConfigError(f"unknown profile {name!r}")
        cfg = self.profiles[name]
        if cfg.point is not None:
            return cfg.point
        return _density(cfg.density or [])

    def build_form(self, expr: FormExpr, _seen: tuple[str, ...] = ()) -> IntegralForm:
        """Evaluate a form expression tree.

        Raises:
            ConfigError: On unknown names, cyclic references or invalid operands.
        """
        n = self.backend.dim
        try:
            if expr.ref is not None:
                if expr.ref in _seen:
                    raise ConfigError(f"cyclic form reference {expr.ref!r}")
                if expr.ref not in self.forms:
                    raise ConfigError(f"unknown form {expr.ref!r}")
                return self.build_form(self.forms[expr.ref], (*_seen, expr.ref))
            if expr.unit is not None:
                return IntegralForm.unit(n, complex(*expr.unit))
            if expr.insert is not None:
                return insert_at(expr.insert.at, self.form_field(expr.insert.field))
            if expr.lift is not None:
                profile = self.profile(expr.lift.profile)
                if not isinstance(profile, Density):
                    raise ConfigError(f"profile {expr.lift.profile!r} is a point mass; use insert")
                return lift_form(profile, self.form_field(expr.lift.field))
            if expr.wedge is not None:
                if not expr.wedge:
                    raise ConfigError("wedge needs at least one operand")
                return wedge_all(self.build_form(e, _seen) for e in expr.wedge)
            if expr.sum is not None:
                out = IntegralForm.zero(n)
                for e in expr.sum:
                    out = out + self.build_form(e, _seen)
                return out
            if expr.scale is not None:
                return self.build_form(expr.scale.of, _seen) * complex(*expr.scale.factor)
            if expr.rotate is not None:
                return rotate(expr.rotate.t, self.build_form(expr.rotate.of, _seen))
            if expr.average is not None:
                return average(self.build_form(expr.average.of, _seen), expr.average.k)
        except ConfigError:
            raise
        except (LoopIntError, ValueError) as exc:
            raise ConfigError(f"invalid form expression: {exc}") from exc
        raise ConfigError("empty form expression")

    def build_forms(self) -> dict[str, IntegralForm]:
        return {name: self.build_form(FormExpr(ref=name)) for name in self.forms}

    def resolved_dict(self) -> dict:
        """The fully resolved config, embedded in every report."""
        return self.model_dump(mode="json")


def _torus(cfg: BackendConfig) -> FlatTorus:
    lattice = np.eye(cfg.dim) if cfg.lattice is None else np.asarray(cfg.lattice)
    return FlatTorus(lattice, tuple(cfg.spin_structure))


def _poly_term(dim: int, freq: list[int], kind: str, coeff: complex) -> TrigPolynomial:
    f = tuple(freq) if freq else (0,) * dim
    if len(f) != dim:
        raise ConfigError(f"frequency {list(f)} does not have {dim} entries")
    if kind == "cos":
        return TrigPolynomial.cosine(f, 1.0) * coeff
    if kind == "sin":
        return TrigPolynomial.sine(f, 1.0) * coeff
    return TrigPolynomial.from_terms(dim, {f: coeff})


def _field(cfg: FieldConfig, dim: int) -> FormField:
    degrees = {len(t.indices) for t in cfg.terms}
    if len(degrees) != 1:
        raise ConfigError(f"field terms mix degrees {sorted(degrees)}")
    components: dict[int, TrigPolynomial] = {}
    for term in cfg.terms:
        idx = tuple(term.indices)
        if any(i < 1 or i > dim for i in idx) or list(idx) != sorted(set(idx)):
            raise ConfigError(f"indices {list(idx)} must increase within 1..{dim}")
        poly = _poly_term(dim, term.freq, term.kind, complex(*term.coeff))
        mask = mask_of(idx)
        components[mask] = components[mask] + poly if mask in components else poly
    return FormField(dim, degrees.pop(), components)


def _density(terms: list[DensityTerm]) -> Density:
    poly = TrigPolynomial.zero(1)
    for term in terms:
        poly = poly + _poly_term(1, [term.freq], term.kind, complex(*term.coeff))
    return Density(poly=poly)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def apply_env_overrides(
    config: ExperimentConfig, environ: Mapping[str, str] | None = None
) -> ExperimentConfig:
    """Apply LOOPINT_SEED, LOOPINT_WORKERS, LOOPINT_N_SAMPLES and LOOPINT_OUT."""
    env = os.environ if environ is None else environ
    mc: dict[str, int] = {}
    try:
        for key, name in (("SEED", "seed"), ("WORKERS", "workers"), ("N_SAMPLES", "n_samples")):
            if ENV_PREFIX + key in env:
                mc[name] = int(env[ENV_PREFIX + key])
    except ValueError as exc:
        raise ConfigError(f"invalid integer in environment override: {exc}") from exc
    update: dict[str, object] = {}
    if mc:
        update["monte_carlo"] = config.monte_carlo.model_copy(update=mc)
    if ENV_PREFIX + "OUT" in env:
        update["output"] = OutputConfig(dir=env[ENV_PREFIX + "OUT"])
    return config.model_copy(update=update) if update else config


def with_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    workers: int | None = None,
    out: Path | str | None = None,
) -> ExperimentConfig:
    """Apply command-line overrides, which win over environment and file."""
    mc: dict[str, int] = {}
    if seed is not None:
        mc["seed"] = seed
    if workers is not None:
        mc["workers"] = workers
    update: dict[str, object] = {}
    if mc:
        update["monte_carlo"] = config.monte_carlo.model_copy(update=mc)
    if out is not None:
        update["output"] = OutputConfig(dir=str(out))
    return config.model_copy(update=update) if update else config


def load_config(path: Path | str = "experiment.yaml") -> ExperimentConfig:
    """Load and validate an experiment file.

    Args:
        path: Path to the YAML (or JSON) document.

    Returns:
        A validated ExperimentConfig.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: If the file is empty, not a mapping, or violates the schema.
    """
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    try:
        data = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file is not valid YAML: {config_path}: {exc}") from exc

    if data is None:
        raise ConfigError(f"Config file is empty: {config_path}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config file must contain a mapping: {config_path}")

    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config {config_path}:\n{exc}") from exc
