import math
import os
from typing import Literal

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigurationError

Formulation = Literal["vortex", "dipole"]
ScenarioKind = Literal["linear_wave", "stokes2", "cnoidal", "breaking", "custom"]
BackgroundKind = Literal["zero", "uniform_gamma_flat", "harmonic_H", "mirror_flat_bottom"]
Regularizer = Literal["none", "filter", "offset"]

DEFAULT_OUTPUT_DIR = "runs"
DEFAULT_LOG_LEVEL = "INFO"


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class PhysParams(_Settings):
    """Physical constants shared by every solve of a run."""
    g: float = Field(1.0, gt=0)
    rho_F: float = Field(1.0, gt=0)
    rho_A: float = Field(0.0, ge=0)
    sigma: float = Field(0.0, ge=0)
    gamma: float = 0.0
    omega0: float = 0.0
    alpha: float = Field(1.0, ge=0.0, le=1.0)
    L: float = Field(2 * math.pi, gt=0)
    h0: float = Field(1.0, gt=0)

    @property
    def A_tw(self) -> float:
        return (self.rho_F - self.rho_A) / (self.rho_F + self.rho_A)

    @property
    def single_fluid(self) -> bool:
        return self.rho_A == 0.0


class VortexSpec(_Settings):
    x: float
    y: float
    strength: float


class ScenarioSpec(_Settings):
    kind: ScenarioKind = "linear_wave"
    A: float = Field(1e-3, ge=0)
    k: float = Field(1.0, gt=0)
    L: float | None = Field(None, gt=0)
    h0: float | None = Field(None, gt=0)
    g: float | None = Field(None, gt=0)
    n_surface: int = Field(256, ge=8)
    n_bottom: int | None = Field(None, ge=8)
    formulation: Formulation = "dipole"
    deep_water: bool = False
    vortices: list[VortexSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_wavenumber(self):
        if self.kind in ("linear_wave", "stokes2", "breaking") and self.L is not None:
            modes = self.k * self.L / (2 * math.pi)
            if abs(modes - round(modes)) > 1e-9:
                raise ValueError(f"k*L/(2*pi) must be an integer, got {modes}")
        return self

    @property
    def bottom_points(self) -> int:
        return self.n_bottom if self.n_bottom is not None else self.n_surface


class StepConfig(_Settings):
    dt: float | None = Field(None, gt=0)
    fixed_point_tol: float = Field(1e-12, gt=0)
    fixed_point_max_iters: int = Field(50, ge=1)
    fixed_point_floor: float = Field(1e-8, gt=0)
    cfl_target: float = Field(0.1, gt=0)
    oec_enabled: bool = False


class FilterSpec(_Settings):
    xi0: float = Field(math.pi / 4, gt=0, lt=math.pi)
    d: float = Field(math.pi / 40, gt=0)


class OffsetSpec(_Settings):
    delta: float = Field(1.0, ge=0)
    eps_factor: float = Field(0.5, ge=0)


class InstabilityThresholds(_Settings):
    spacing_ratio: float = Field(1e-3, gt=0)
    density_growth: float = Field(1e3, gt=1)
    degeneration_ratio: float = Field(1e-3, gt=0)


class RunConfig(_Settings):
    """Everything needed to reproduce one simulation."""
    name: str = "run"
    scenario: ScenarioSpec = Field(default_factory=ScenarioSpec)
    step: StepConfig = Field(default_factory=StepConfig)
    physics: PhysParams = Field(default_factory=PhysParams)
    background: BackgroundKind = "zero"
    regularizer: Regularizer = "none"
    filter: FilterSpec = Field(default_factory=FilterSpec)
    offset: OffsetSpec = Field(default_factory=OffsetSpec)
    thresholds: InstabilityThresholds = Field(default_factory=InstabilityThresholds)
    output_dir: str | None = None
    snapshot_every: int = Field(10, ge=1)
    end_time: float = Field(1.0, gt=0)
    save_times: list[float] = Field(default_factory=list)
    stop_on_instability: bool = True
    stop_on_splash: bool = True
    progress: bool = True

    @model_validator(mode="before")
    @classmethod
    def _inherit_geometry(cls, data):
        if not isinstance(data, dict):
            return data
        physics = data.get("physics") or {}
        scenario = data.get("scenario")
        if isinstance(physics, PhysParams):
            physics = physics.model_dump()
        if isinstance(scenario, ScenarioSpec):
            scenario = scenario.model_dump()
        if scenario is None:
            scenario = {}
        scenario = dict(scenario)
        for key, default in (("L", 2 * math.pi), ("h0", 1.0), ("g", 1.0)):
            if scenario.get(key) is None:
                scenario[key] = physics.get(key, default)
        data = dict(data)
        data["scenario"] = scenario
        return data

    @model_validator(mode="after")
    def _check_consistency(self):
        sc, ph = self.scenario, self.physics
        for key in ("L", "h0", "g"):
            if not math.isclose(getattr(sc, key), getattr(ph, key), rel_tol=1e-14):
                raise ValueError(f"scenario.{key}={getattr(sc, key)} disagrees with physics.{key}={getattr(ph, key)}")
        if self.step.oec_enabled and sc.formulation != "dipole":
            raise ValueError("odd-even smoothing is only available with the dipole formulation")
        if self.regularizer != "none" and sc.formulation != "vortex":
            raise ValueError(f"regularizer '{self.regularizer}' requires the vortex formulation")
        if self.regularizer == "filter" and sc.n_surface % 2:
            raise ValueError("the Fourier filter needs an even number of surface points")
        if sc.formulation == "dipole" and not ph.single_fluid:
            if ph.gamma != 0.0 or ph.omega0 != 0.0 or sc.vortices:
                raise ValueError("a two-fluid dipole run needs zero circulation, zero vorticity and no vortices")
            if self.background != "zero":
                raise ValueError("a two-fluid dipole run cannot use a background field")
        if sc.formulation == "dipole" and (ph.omega0 != 0.0 or sc.vortices) and self.background != "mirror_flat_bottom":
            raise ValueError("dipole runs carry vorticity only through the mirror_flat_bottom background")
        if self.background != "zero" and sc.formulation != "dipole":
            raise ValueError("background fields belong to the dipole formulation")
        if sc.deep_water and ph.omega0 != 0.0:
            raise ValueError("uniform vorticity needs a bottom to bound the fluid")
        if sc.deep_water and sc.kind == "cnoidal":
            raise ValueError("the cnoidal wave needs a finite depth")
        if self.background == "mirror_flat_bottom" and sc.deep_water:
            raise ValueError("mirror_flat_bottom needs a bottom")
        if self.background == "harmonic_H" and sc.deep_water:
            raise ValueError("harmonic_H needs a bottom")
        if any(t <= 0.0 or t > self.end_time for t in self.save_times):
            raise ValueError(f"save_times must lie in (0, end_time={self.end_time}]")
        return self


def env_output_dir() -> str:
    return os.getenv("WAVESHEET_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def env_log_level() -> str:
    return os.getenv("WAVESHEET_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


def env_workers() -> int:
    raw = os.getenv("WAVESHEET_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, (os.cpu_count() or 2) - 1)


def parse_run_config(data: dict) -> RunConfig:
    """Validates a plain mapping, turning pydantic failures into ConfigurationError."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(str(e)) from e


def load_run_config(path: str) -> RunConfig:
    """
    Reads a TOML run-config file.

    Args:
        path (str): Path of the TOML document.

    Returns:
        RunConfig: the validated configuration.

    Raises:
        FileNotFoundError: if the file does not exist.
        ConfigurationError: if the document does not validate.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Run config not found at: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = toml.load(fh)
        except toml.TomlDecodeError as e:
            raise ConfigurationError(f"Invalid TOML in {path}: {e}") from e
    return parse_run_config(data)


def dump_run_config(cfg: RunConfig) -> str:
    """TOML echo of a config; load_run_config on it gives back an equal config."""
    return toml.dumps(cfg.model_dump(mode="json", exclude_none=True))


if __name__ == '__main__':
    cfg = RunConfig(scenario={"kind": "breaking", "A": 0.5, "n_surface": 256}, end_time=3.0)
    text = dump_run_config(cfg)
    print(text)
    print("round trip equal:", parse_run_config(toml.loads(text)) == cfg)
