"""Structured CLI configuration: JSON file, flag overrides, echo.

A CliConfig mirrors the training knobs plus the fit/search options that
only matter at the command line. Files may specify any subset; unknown
keys are rejected rather than ignored so typos fail loudly. Flags win
over file values, and the effective (merged) config is echoed with every
output so results stay attributable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError, InputError
from .mlp import TrainConfig
from .retrieval import METRICS

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class CliConfig:
    """Every tunable the commands accept, with reproducible defaults.

    The first ten fields mirror TrainConfig; ``ridge_lambda`` steers the
    linear fit, ``metric`` the search, and ``normalize`` optionally
    L2-normalizes embeddings before fitting or searching (off by
    default: raw coordinates are the reference behavior).
    """

    alpha: float = 0.5
    beta: float = 0.1
    gamma: float = 0.1
    tau: float = 0.9
    huber_delta: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0
    shuffle: bool = True
    ridge_lambda: float = DEFAULT_RIDGE
    metric: str = "cosine"
    normalize: bool = False

    def __post_init__(self):
        self.train_config()  # reuse TrainConfig range checks
        if self.ridge_lambda < 0:
            raise InputError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.metric not in METRICS:
            raise InputError(f"metric must be one of {METRICS}, got {self.metric!r}")

    def train_config(self) -> TrainConfig:
        fields = {k: v for k, v in asdict(self).items() if k in TrainConfig.__dataclass_fields__}
        return TrainConfig(**fields)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "CliConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "CliConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "CliConfig":
        """Apply non-None overrides (flag values) on top of this config."""
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config overrides: {sorted(unknown)}")
        merged = self.to_dict()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return CliConfig(**merged)


def resolve_config(config_path=None, **overrides) -> CliConfig:
    """File config (if given) layered under flag overrides."""
    base = CliConfig.load(config_path) if config_path else CliConfig()
    return base.with_overrides(**overrides)
