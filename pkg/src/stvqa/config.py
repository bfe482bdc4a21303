"""Pipeline configuration with the published defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .bandpass import DEFAULT_C
from .errors import ConfigurationError
from .stchips import SELECTION_RULES

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class PipelineConfig:
    K: int = 3  # MSCN window half-size
    C_stabilizer: float = DEFAULT_C
    a: float = 0.5  # temporal kernel decay
    T: int = 5  # frames per group (T')
    R: int = 5  # chip side
    Q: int = 6  # searched angles
    D: int = 4  # window stride factor
    scales: int = 2
    niqe_model_path: Optional[str] = None
    seed: int = 0
    thread_count: int = 1
    selection: str = "closest"

    def __post_init__(self):
        if self.R != self.T:
            raise ConfigurationError(f"chip side R={self.R} must equal group length T'={self.T}")
        if self.R % 2 == 0 or self.R < 3:
            raise ConfigurationError(f"R must be odd and >= 3, got {self.R}")
        if self.Q < 2:
            raise ConfigurationError(f"Q must be >= 2, got {self.Q}")
        if self.D < 1:
            raise ConfigurationError(f"D must be >= 1, got {self.D}")
        if self.scales != 2:
            raise ConfigurationError("exactly two scales are supported")
        if self.K < 1 or self.C_stabilizer <= 0 or self.a <= 0:
            raise ConfigurationError("K, C_stabilizer and a must be positive")
        if self.thread_count < 1:
            raise ConfigurationError("thread_count must be >= 1")
        if self.selection not in SELECTION_RULES:
            raise ConfigurationError(f"selection must be one of {SELECTION_RULES}")

    @property
    def min_dimension(self):
        return self.R * self.D

    def replace(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_toml(cls, path, **overrides):
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"invalid config {path}: {exc}") from exc
        data = data.get("pipeline", data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).replace(**overrides)
