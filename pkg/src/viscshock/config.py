"""Experiment configuration: TOML on disk, validated by pydantic."""
from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .flux import FluxSpec, ScalarFunction, ShockData
from .grid import Grid


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TransverseSpec(_Section):
    coeffs: list[float] = Field(default_factory=list)
    amp: float = 0.0
    freq: float = 1.0
    phase: float = 0.0


class FluxConfig(_Section):
    kind: Literal["burgers", "sin", "poly"] = "burgers"
    a: float = Field(gt=0)
    kappa: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    coeffs: list[float] = Field(default_factory=list)
    g2_bound: Optional[float] = None
    transverse: list[TransverseSpec] = Field(default_factory=list)

    def build(self) -> FluxSpec:
        if self.kind == "burgers":
            g = ScalarFunction()
            bound = 0.0 if self.g2_bound is None else self.g2_bound
        elif self.kind == "sin":
            g = ScalarFunction((), self.kappa, self.omega, self.phase)
            bound = abs(self.kappa) * self.omega**2 if self.g2_bound is None else self.g2_bound
        else:
            g = ScalarFunction(tuple(self.coeffs))
            if self.g2_bound is None:
                raise ConfigError("flux.g2_bound is required for kind = 'poly'")
            bound = self.g2_bound
        trans = tuple(ScalarFunction(tuple(t.coeffs), t.amp, t.freq, t.phase)
                      for t in self.transverse)
        return FluxSpec(a=self.a, g=g, g2_bound=bound, transverse=trans)


class ShockConfig(_Section):
    u_minus: float
    u_plus: float


class GridConfig(_Section):
    L: float = Field(gt=0)
    n_xi: int = Field(ge=5)
    n_dims: int = Field(default=2, ge=2)
    n_t: int = Field(default=16, ge=3)

    def build(self) -> Grid:
        return Grid(self.L, self.n_xi, self.n_dims, self.n_t)


class TimeConfig(_Section):
    dt_policy: Literal["auto", "fixed"] = "auto"
    dt: Optional[float] = Field(default=None, gt=0)
    t_final: float = Field(gt=0)
    diag_dt: float = Field(default=0.1, gt=0)
    diag_every: Optional[int] = Field(default=None, ge=1)
    quad_points: int = Field(default=10, ge=1)
    c_diff: float = Field(default=0.9, gt=0)
    c_adv: float = Field(default=0.9, gt=0)

    @model_validator(mode="after")
    def _fixed_needs_dt(self):
        if self.dt_policy == "fixed" and self.dt is None:
            raise ValueError("time.dt is required when dt_policy = 'fixed'")
        return self


class InitialConfig(_Section):
    family: Literal["profile", "bump", "modulated_bump", "shifted_profile",
                    "plateau", "random"] = "bump"
    amplitude: float = 1.0
    center: float = 0.0
    width: float = Field(default=2.0, gt=0)
    torus_center: float = 0.5
    torus_width: Optional[float] = None
    edge: float = Field(default=0.05, gt=0)
    shift: float = 0.0
    seed: int = 0
    margin: Optional[float] = None


class OutputConfig(_Section):
    directory: Optional[str] = None
    snapshot_times: list[float] = Field(default_factory=list)


class ToleranceConfig(_Section):
    tol_residual: Optional[float] = None
    tail_tol: float = 1e-6
    conservation_rel: float = 1e-8
    max_principle: float = 1e-10
    l1_rel: float = 1e-9
    cauchy_schwarz_rel: float = 1e-12
    cfl_growth: float = 1e-8


class FitConfig(_Section):
    t_min: float = Field(default=1.0, gt=0)


class ChecksConfig(_Section):
    disable: list[str] = Field(default_factory=list)


class ExperimentConfig(_Section):
    name: str = "experiment"
    flux: FluxConfig
    shock: ShockConfig
    grid: GridConfig
    time: TimeConfig
    initial: InitialConfig = Field(default_factory=InitialConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    checks: ChecksConfig = Field(default_factory=ChecksConfig)
    profile_tol: float = Field(default=1e-10, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.grid.n_dims - 1 < len(self.flux.transverse):
            raise ValueError("more transverse fluxes than torus directions")
        if not all(math.isfinite(v) for v in (self.shock.u_minus, self.shock.u_plus)):
            raise ValueError("shock states must be finite")
        return self

    def build_flux(self) -> FluxSpec:
        return self.flux.build()

    def build_shock(self, flux: FluxSpec | None = None) -> ShockData:
        flux = flux or self.build_flux()
        return ShockData.from_states(flux, self.shock.u_minus, self.shock.u_plus)

    def build_grid(self) -> Grid:
        return self.grid.build()

    def echo(self) -> dict:
        """Full config including defaults, as written to the run manifest."""
        return self.model_dump(mode="json")


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw.setdefault("name", path.stem)
    return parse_config(raw)
