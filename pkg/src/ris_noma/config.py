"""Experiment configuration: TOML files validated by pydantic models."""

import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ris_noma.beamforming.active import ActiveMethod
from ris_noma.beamforming.alternating import DesignMode
from ris_noma.channel_models import (
    DEFAULT_DIRECT_EXPONENT,
    DEFAULT_NOISE_DBM,
    DEFAULT_REFERENCE_LOSS_DB,
    DEFAULT_REFLECTED_EXPONENT,
    DEFAULT_RICIAN_K,
    DEFAULT_TRANSMIT_POWER_DBM,
    FadingModel,
    FadingSpec,
    LinkFading,
    NetworkGeometry,
    SystemParams,
)
from ris_noma.deployment_planner import (
    DEFAULT_CHANNEL_DRAWS,
    DEFAULT_GRID_BOUNDS,
    DEFAULT_GRID_STEP,
    DeploymentScheme,
)
from ris_noma.errors import ConfigError
from ris_noma.region_engine import (
    DEFAULT_BOUNDARY_SAMPLES,
    DEFAULT_ENUMERATION_CAP,
    DEFAULT_FDMA_GRID,
    ConfigMode,
    EnumerationMode,
    ProfileEnumeration,
    Scheme,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # no cov
    import tomli as tomllib

OUTPUT_DIR_ENV = "RIS_NOMA_OUTPUT_DIR"

Position = Tuple[float, float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FadingConfig(_Section):
    model: FadingModel
    rician_k: float = Field(default=DEFAULT_RICIAN_K, ge=0)
    path_loss_exponent: float = Field(gt=0)
    reference_loss_db: float = DEFAULT_REFERENCE_LOSS_DB

    def to_spec(self) -> FadingSpec:
        return FadingSpec(
            self.model, self.rician_k, self.path_loss_exponent, self.reference_loss_db
        )


class ChannelSection(_Section):
    direct: FadingConfig = FadingConfig(
        model=FadingModel.RAYLEIGH, path_loss_exponent=DEFAULT_DIRECT_EXPONENT
    )
    reflected: FadingConfig = FadingConfig(
        model=FadingModel.RICIAN, path_loss_exponent=DEFAULT_REFLECTED_EXPONENT
    )


class GeometrySection(_Section):
    bs_position: Position = (0.0, 0.0, 5.0)
    ris_positions: List[Position] = [(37.5, 0.0, 1.5)]
    user_positions: List[Position] = Field(default=[(37.5, 2.0, 0.0)], min_length=1)


class SystemSection(_Section):
    transmit_power_dbm: float = DEFAULT_TRANSMIT_POWER_DBM
    noise_dbm: float = DEFAULT_NOISE_DBM
    antennas: int = Field(default=1, ge=1)
    elements: int = Field(default=8, ge=0)
    bits: Optional[int] = Field(default=1, ge=1)
    # unset: blocked for deploy sweeps, present everywhere else
    blocked_direct: Optional[Union[bool, List[bool]]] = None


class EnumerationSection(_Section):
    mode: EnumerationMode = EnumerationMode.DISCRETE_EXHAUSTIVE
    count: int = Field(default=256, ge=1)
    cap: int = Field(default=DEFAULT_ENUMERATION_CAP, ge=1)
    include_aligned: bool = False


class RegionSection(_Section):
    schemes: List[Scheme] = [Scheme.NOMA, Scheme.TDMA, Scheme.FDMA]
    modes: List[ConfigMode] = [ConfigMode.STATIC, ConfigMode.DYNAMIC]
    enumeration: EnumerationSection = EnumerationSection()
    boundary_samples: int = Field(default=DEFAULT_BOUNDARY_SAMPLES, ge=2)
    fdma_grid: int = Field(default=DEFAULT_FDMA_GRID, ge=2)
    draw: int = Field(default=0, ge=0)


class DeploySection(_Section):
    schemes: List[DeploymentScheme] = [
        DeploymentScheme.S_NOMA,
        DeploymentScheme.S_FDMA,
        DeploymentScheme.D_TDMA,
    ]
    weights: List[float]
    grid_start: float = DEFAULT_GRID_BOUNDS[0]
    grid_stop: float = DEFAULT_GRID_BOUNDS[1]
    grid_step: float = Field(default=DEFAULT_GRID_STEP, gt=0)
    channel_draws: int = Field(default=DEFAULT_CHANNEL_DRAWS, ge=1)
    min_rates: Optional[List[float]] = None
    enumeration: EnumerationSection = EnumerationSection(include_aligned=True)

    @model_validator(mode="after")
    def _check(self) -> "DeploySection":
        if abs(sum(self.weights) - 1.0) > 1e-9:
            msg = f"weights must sum to 1, got {sum(self.weights):.12g}"
            raise ValueError(msg)
        if any(w < 0 for w in self.weights):
            msg = "weights must be >= 0"
            raise ValueError(msg)
        if self.grid_stop < self.grid_start:
            msg = "grid_stop must not be below grid_start"
            raise ValueError(msg)
        return self

    @property
    def bounds(self) -> Tuple[float, float]:
        return (self.grid_start, self.grid_stop)

    def grid(self) -> Tuple[float, ...]:
        count = int(math.floor((self.grid_stop - self.grid_start) / self.grid_step + 1e-9)) + 1
        return tuple(min(self.grid_start + i * self.grid_step, self.grid_stop) for i in range(count))


class BeamformSection(_Section):
    mode: DesignMode = DesignMode.POWER_MIN
    targets: Tuple[float, float] = (1.0, 1.0)
    weights: Tuple[float, float] = (0.5, 0.5)
    max_iters: int = Field(default=50, ge=1)
    tolerance: float = Field(default=1e-6, gt=0)
    active_method: ActiveMethod = ActiveMethod.STRUCTURED
    reorder: bool = False
    draw: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "BeamformSection":
        if self.mode is DesignMode.POWER_MIN and min(self.targets) <= 0:
            msg = "SINR targets must be > 0"
            raise ValueError(msg)
        return self


class ClusterSection(_Section):
    design: Literal["centralized", "distributed"] = "centralized"
    clusters: List[List[int]] = Field(min_length=1)
    serving_ris: List[int] = []
    gain_floors: Optional[List[float]] = None
    penalty: float = Field(default=10.0, ge=0)
    draw: int = Field(default=0, ge=0)


class ExperimentConfig(_Section):
    experiment: Literal["region", "deploy", "beamform", "cluster"]
    seed: int = Field(ge=0, lt=2**64)
    output_dir: str = "results"
    channel: ChannelSection = ChannelSection()
    geometry: GeometrySection = GeometrySection()
    system: SystemSection = SystemSection()
    region: Optional[RegionSection] = None
    deploy: Optional[DeploySection] = None
    beamform: Optional[BeamformSection] = None
    cluster: Optional[ClusterSection] = None

    @model_validator(mode="after")
    def _block_present(self) -> "ExperimentConfig":
        if getattr(self, self.experiment) is None:
            msg = f"experiment '{self.experiment}' needs a [{self.experiment}] section"
            raise ValueError(msg)
        blocked = self.system.blocked_direct
        users = len(self.geometry.user_positions)
        if isinstance(blocked, list) and len(blocked) != users:
            msg = f"blocked_direct lists {len(blocked)} flags for {users} users"
            raise ValueError(msg)
        return self

    def blocked_direct(self, default: bool) -> Union[bool, Tuple[bool, ...]]:
        """Per-user direct-link blocking, ``default`` when the file leaves it unset."""
        blocked = self.system.blocked_direct
        if blocked is None:
            return default
        return blocked if isinstance(blocked, bool) else tuple(blocked)

    def fading(self) -> LinkFading:
        return LinkFading(self.channel.direct.to_spec(), self.channel.reflected.to_spec())

    def network(self) -> NetworkGeometry:
        return NetworkGeometry(
            tuple(self.geometry.bs_position),
            tuple(tuple(p) for p in self.geometry.ris_positions),
            tuple(tuple(p) for p in self.geometry.user_positions),
        )

    def system_params(self) -> SystemParams:
        return SystemParams(self.system.transmit_power_dbm, self.system.noise_dbm)

    def enumeration(self, section: EnumerationSection) -> ProfileEnumeration:
        return ProfileEnumeration(
            mode=section.mode,
            bits=self.system.bits or 1,
            count=section.count,
            seed=self.seed,
            cap=section.cap,
            include_aligned=section.include_aligned,
        )


def _field_errors(error: ValidationError) -> Dict[str, str]:
    errors = {}
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        errors[path] = item["msg"]
    return errors


def validate_config(data: Mapping, *, seed_override: Optional[int] = None) -> ExperimentConfig:
    """Validate a parsed mapping; ``seed_override`` wins over the file's seed."""
    payload = dict(data)
    if seed_override is not None:
        payload["seed"] = seed_override
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        msg = "invalid experiment configuration"
        raise ConfigError(msg, _field_errors(e)) from e


def load_config(
    path: Union[str, Path],
    *,
    seed_override: Optional[int] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Read and validate a TOML experiment file.

    Raises:
        ConfigError: If the file is unreadable, not TOML, or fails validation
    """
    environ = os.environ if environ is None else environ
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except OSError as e:
        msg = f"cannot read config {path}: {e}"
        raise ConfigError(msg) from e
    except tomllib.TOMLDecodeError as e:
        msg = f"config {path} is not valid TOML: {e}"
        raise ConfigError(msg) from e
    config = validate_config(data, seed_override=seed_override)
    output_dir = environ.get(OUTPUT_DIR_ENV)
    if output_dir:
        config = config.model_copy(update={"output_dir": output_dir})
    return config


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON dump, ``output_dir`` excluded."""
    payload = config.model_dump(mode="json", exclude={"output_dir"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
