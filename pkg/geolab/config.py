"""
Geodesic Lab - Configuration Module

This module reads run settings from three layers: a flat key=value config
file, command-line flags, and the environment (.env via python-dotenv).
Each command validates its settings through a pydantic model whose
model_dump() is written verbatim into the run manifest.
"""

import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from .gaussian import GaussianInt, parse_gaussian

MODULUS_LIMIT = 200


def default_cache() -> str:
    return os.getenv("GEODESIC_LAB_CACHE", "./.geolab_cache")


def default_out() -> str:
    return os.getenv("GEODESIC_LAB_OUT", "./out")


def default_workers() -> int:
    return int(os.getenv("GEODESIC_LAB_WORKERS", "1"))


def load_config_file(path: str) -> Dict[str, str]:
    """
    Parse key=value lines; '#' starts a comment and dashes in keys become underscores.

    Raises:
        ValueError: the file is missing or a line has no '='
    """
    config_path = Path(path)
    try:
        text = config_path.read_text()
    except FileNotFoundError as e:
        raise ValueError(f"Config file not found: {config_path}") from e
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{config_path}:{number}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def merge_settings(file_values: Dict[str, Any], flag_values: Dict[str, Any]) -> Dict[str, Any]:
    """Flags that were given override file values; the environment fills the cache default"""
    merged = dict(file_values)
    merged.update({key: value for key, value in flag_values.items() if value is not None})
    if "cache" not in flag_values or flag_values.get("cache") is None:
        env_cache = os.getenv("GEODESIC_LAB_CACHE")
        if env_cache:
            merged["cache"] = env_cache
    return merged


def parse_modulus(text: str) -> GaussianInt:
    """A nonzero non-unit Gaussian modulus within the desk bound"""
    q = parse_gaussian(str(text))
    if not q:
        raise ValueError("Modulus must be nonzero")
    if q.is_unit():
        raise ValueError(f"Modulus {q} is a unit")
    if q.norm() > MODULUS_LIMIT:
        raise ValueError(f"Modulus {q} has norm {q.norm()} > {MODULUS_LIMIT}")
    return q


class RunConfig(BaseModel):
    """Settings shared by every command"""

    out: str = Field(default_factory=default_out, description="Output directory")
    cache: str = Field(default_factory=default_cache, description="Cache directory")
    workers: int = Field(default_factory=default_workers, ge=1, description="Worker processes")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


class PartitionConfig(RunConfig):
    radius: float = Field(default=4.0, ge=3.0, description="Partition radius R")
    certify: Optional[bool] = Field(default=None, description="Force or skip the exact Markov certificate")


class DeltaConfig(RunConfig):
    radius: float = Field(default=4.0, ge=4.0, description="Partition radius R")
    tol: float = Field(default=1e-3, ge=1e-4, description="Target width of the delta bracket")
    max_depth: int = Field(default=3, ge=1, le=6, description="Deepest cylinder level")
    s_step: float = Field(default=0.05, gt=0.0, le=0.5, description="Grid step for pressure.csv")

    @property
    def depths(self) -> Tuple[int, ...]:
        return tuple(range(min(2, self.max_depth), self.max_depth + 1))


class EnumerateConfig(RunConfig):
    radius: float = Field(default=4.0, ge=3.0, description="Partition radius R")
    ball: float = Field(default=16.0, description="Norm-ball radius X")
    mod: Optional[str] = Field(default=None, description="Modulus for equidistribution bins")
    csv: Optional[str] = Field(default=None, description="Path for geodesics.csv")
    aperiodic_only: bool = Field(default=True, description="Keep primitive words only")

    @field_validator("ball")
    @classmethod
    def _ball_radius(cls, value: float) -> float:
        if value < math.sqrt(2.0):
            raise ValueError(f"Ball radius must be >= sqrt(2), got {value}")
        return value

    @field_validator("mod")
    @classmethod
    def _modulus(cls, value: Optional[str]) -> Optional[str]:
        if value is not None:
            parse_modulus(value)
        return value

    @property
    def modulus(self) -> Optional[GaussianInt]:
        return parse_modulus(self.mod) if self.mod is not None else None


class CharsumConfig(RunConfig):
    mod: str = Field(description="Modulus q with N(q) <= 200")
    all_xi: bool = Field(default=False, description="Scan every xi with unit components")
    xi: Optional[str] = Field(default=None, description="One vector a,b,c,d")

    @field_validator("mod")
    @classmethod
    def _modulus(cls, value: str) -> str:
        parse_modulus(value)
        return value

    @field_validator("xi")
    @classmethod
    def _vector(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and len(value.split(",")) != 4:
            raise ValueError(f"xi needs four comma-separated components, got {value!r}")
        return value

    @model_validator(mode="after")
    def _one_scan(self) -> "CharsumConfig":
        if self.all_xi and self.xi is not None:
            raise ValueError("--all-xi and --xi are mutually exclusive")
        if not self.all_xi and self.xi is None:
            self.all_xi = True
        return self

    @property
    def modulus(self) -> GaussianInt:
        return parse_modulus(self.mod)

    @property
    def vectors(self) -> Optional[List[Tuple[GaussianInt, ...]]]:
        if self.xi is None:
            return None
        return [tuple(parse_gaussian(part) for part in self.xi.split(","))]


class SieveConfig(RunConfig):
    radius: float = Field(default=4.0, ge=4.0, description="Partition radius R")
    X: float = Field(default=32.0, ge=2.0, description="Ball radius for the Xi slice")
    Y: float = Field(default=4.0, ge=2.0, description="Ball radius for the Aleph connectors")
    Z: float = Field(default=4.0, ge=2.0, description="Ball radius for the Omega slice")
    level: int = Field(default=50, ge=1, le=MODULUS_LIMIT, description="Sieve level Q")
    almost_prime_level: Optional[int] = Field(default=None, ge=2, description="Prime norm bound for the almost-prime count")


class HarvestConfig(RunConfig):
    radius: float = Field(default=4.0, ge=3.0, description="Partition radius R")
    ball: float = Field(default=32.0, description="Norm-ball radius X")
    delta: Optional[float] = Field(default=None, gt=0.0, lt=2.0, description="delta_R for the multiplicity threshold")
    eta: float = Field(default=0.05, gt=0.0, description="Threshold slack")

    @field_validator("ball")
    @classmethod
    def _ball_radius(cls, value: float) -> float:
        if value < math.sqrt(2.0):
            raise ValueError(f"Ball radius must be >= sqrt(2), got {value}")
        return value


COMMAND_CONFIGS = {
    "partition": PartitionConfig,
    "delta": DeltaConfig,
    "enumerate": EnumerateConfig,
    "charsums": CharsumConfig,
    "sieve": SieveConfig,
    "harvest": HarvestConfig,
}


def build_config(command: str, flag_values: Dict[str, Any], config_path: Optional[str] = None) -> RunConfig:
    """Validated settings for one command; unknown file keys are rejected"""
    model = COMMAND_CONFIGS[command]
    file_values = load_config_file(config_path) if config_path else {}
    unknown = sorted(set(file_values) - set(model.model_fields))
    if unknown:
        raise ValueError(f"Unknown config keys for {command}: {', '.join(unknown)}")
    known_flags = {key: value for key, value in flag_values.items() if key in model.model_fields}
    return model(**merge_settings(file_values, known_flags))
