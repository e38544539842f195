# crnt_sim/core/config.py
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..radio.channel import ChannelParams
from ..radio.mac import MacParams
from .errors import ConfigError
from .logger import setup_logger

logger = setup_logger(__name__)

load_dotenv()

REPO_ROOT = Path(__file__).resolve().parents[2]


class Settings:
    LOG_LEVEL: str = os.getenv("CRNT_LOG_LEVEL", "WARNING")

    # Where preset scenarios and configs are looked up by name
    SCENARIO_DIR: Path = Path(os.getenv("CRNT_SCENARIO_DIR", str(REPO_ROOT / "scenarios")))
    CONFIG_DIR: Path = Path(os.getenv("CRNT_CONFIG_DIR", str(REPO_ROOT / "configs")))

    OUTPUT_DIR: Path = Path(os.getenv("CRNT_OUTPUT_DIR", "./results"))

    @property
    def sweep_workers(self) -> int:
        raw = os.getenv("CRNT_SWEEP_WORKERS")
        if raw:
            try:
                return max(1, int(raw))
            except ValueError:
                logger.warning(f"Ignoring non-integer CRNT_SWEEP_WORKERS={raw!r}")
        return os.cpu_count() or 1


settings = Settings()


class ProtocolMode(str, Enum):
    BASELINE = "baseline"
    CRNT = "crnt"


class InjectorParams(BaseModel):
    """Forced loss of otherwise delivered frames inside a time window."""
    model_config = ConfigDict(extra="forbid")

    drop_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    start_s: float = Field(default=0.0, ge=0.0)
    end_s: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _window_order(self):
        if self.end_s is not None and self.end_s <= self.start_s:
            raise ValueError(f"injector end_s ({self.end_s}) must be after start_s ({self.start_s})")
        return self

    @property
    def enabled(self) -> bool:
        return self.drop_fraction > 0.0

    def active_at(self, time_us: int) -> bool:
        if not self.enabled or time_us < self.start_s * 1_000_000:
            return False
        return self.end_s is None or time_us < self.end_s * 1_000_000


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str = "freeway"
    duration_s: float = Field(default=10.0, ge=0.0)
    seed: int = Field(default=1, ge=0)
    mode: ProtocolMode = ProtocolMode.CRNT

    beacon_period_ms: int = Field(default=100, gt=0)
    nt_period_ms: int = Field(default=1000, gt=0)
    cp_threshold_pct: float = Field(default=50.0, ge=0.0, le=100.0)
    pnt_lifetime_ms: int = Field(default=1000, gt=0)
    inspect_throttle_ms: int = Field(default=99, ge=0)
    mobility_step_ms: int = Field(default=100, gt=0)

    channel: ChannelParams = Field(default_factory=ChannelParams)
    mac: MacParams = Field(default_factory=MacParams)
    injector: InjectorParams = Field(default_factory=InjectorParams)

    observer_id: Optional[int] = Field(default=None, ge=0)
    event_log: bool = False
    radio_log: bool = False

    @property
    def duration_us(self) -> int:
        return int(round(self.duration_s * 1_000_000))

    def metadata(self) -> Dict[str, str]:
        """Effective configuration flattened to dotted keys, in field order."""
        flat: Dict[str, str] = {}

        def walk(prefix: str, value: Any):
            if isinstance(value, dict):
                for key, inner in value.items():
                    walk(f"{prefix}.{key}" if prefix else key, inner)
            else:
                flat[prefix] = "" if value is None else str(value)

        walk("", self.model_dump(mode="json"))
        return flat


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "config"
    return f"{location}: {first['msg']}"


def resolve_config_path(name_or_path: Union[str, Path]) -> Path:
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    named = settings.CONFIG_DIR / f"{candidate.stem}.yaml"
    if candidate.suffix == "" and named.exists():
        return named
    raise ConfigError(f"config file not found: {name_or_path}")


def read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def load_run_config(path: Optional[Union[str, Path]] = None, **overrides) -> RunConfig:
    """File values over model defaults, then non-None overrides on top."""
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = resolve_config_path(path)
        data = read_yaml(config_path)
        logger.info(f"Loaded run config from {config_path}")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}") from e
    return apply_overrides(config, **overrides)


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return config
    unknown = sorted(set(updates) - set(RunConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    try:
        return RunConfig.model_validate({**config.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigError(f"invalid override: {_describe(e)}") from e
