"""Configuration for SmartSense models and training runs.

Values resolve in layers: explicit overrides (CLI flags) > config file
(JSON or YAML) > environment variables (SMARTSENSE_<FIELD>, optionally
loaded from .env) > dataclass defaults. Vocabulary sizes always come from
the prepared dataset, never from configuration.
"""

import dataclasses
import logging
from dataclasses import dataclass, fields
from os import getenv
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv

from smartsense.common import ConfigError
from smartsense.constants import (
    ABLATIONS,
    DEFAULT_WINDOW_LENGTH,
    ENV_PREFIX,
    N_DOW,
    N_HOUR_BINS,
)

logger = logging.getLogger(__name__)

TRUE_VALUES = ("true", "1", "yes", "on")

# Sizes owned by the dataset; a config file may not set them
_VOCABULARY_FIELDS = ("n_devices", "n_controls", "n_dow", "n_hour_bins")


@dataclass(frozen=True)
class ModelConfig:
    """Every hyperparameter and ablation switch of a SmartSense model.

    Serialized into checkpoint headers, so a checkpoint is self-describing.
    """

    n_devices: int
    n_controls: int
    d: int = 50
    layers: int = 2
    heads: int = 2
    window_length: int = DEFAULT_WINDOW_LENGTH
    dropout_p: float = 0.1
    n_dow: int = N_DOW
    n_hour_bins: int = N_HOUR_BINS
    layer_norm: bool = True
    act_off: bool = False
    seq_off: bool = False
    reg_off: bool = False
    lambda_reg: float = 1.0
    negatives: int = 5
    lr: float = 0.001
    l2: float = 1e-5
    batch_size: int = 1024
    tie_output: bool = False

    def __post_init__(self):
        violations = []
        for name in ("n_devices", "n_controls", "d", "layers", "heads", "batch_size"):
            if getattr(self, name) < 1:
                violations.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_dow != N_DOW or self.n_hour_bins != N_HOUR_BINS:
            violations.append(
                f"temporal vocabulary is fixed at {N_DOW} days x {N_HOUR_BINS} hour bins"
            )
        if self.heads >= 1 and self.d % self.heads != 0:
            violations.append(f"d={self.d} is not divisible by heads={self.heads}")
        if self.window_length < 2:
            violations.append(f"window_length must be >= 2, got {self.window_length}")
        if not 0.0 <= self.dropout_p < 1.0:
            violations.append(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.negatives < 0:
            violations.append(f"negatives must be >= 0, got {self.negatives}")
        if self.lambda_reg < 0 or self.lr <= 0 or self.l2 < 0:
            violations.append("lambda_reg and l2 must be >= 0 and lr > 0")
        if violations:
            raise ConfigError("Invalid model config: " + "; ".join(violations))

    @property
    def history_length(self) -> int:
        """Number of input events per instance (W - 1)."""
        return self.window_length - 1

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown model config keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TrainSettings:
    """Epoch-loop settings that are not part of the model itself."""

    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    routine_batch: int | None = None
    checkpoint_dir: str = "output/checkpoints"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.routine_batch is not None and self.routine_batch < 1:
            raise ConfigError(f"routine_batch must be >= 1, got {self.routine_batch}")


def apply_ablation(config: ModelConfig, ablation: str | None) -> ModelConfig:
    """Return a copy of config with one of the -Act/-Seq/-Reg/-All switches set."""
    if ablation is None:
        return config
    if ablation not in ABLATIONS:
        raise ConfigError(
            f"Unknown ablation '{ablation}' (expected one of {', '.join(ABLATIONS)})"
        )
    if ablation == "all":
        return dataclasses.replace(config, act_off=True, seq_off=True, reg_off=True)
    return dataclasses.replace(config, **{f"{ablation}_off": True})


def _coerce(name: str, raw: Any, default: Any) -> Any:
    """Convert a raw config/env value to the type of the field default."""
    if raw is None and default is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in TRUE_VALUES
        if isinstance(default, int) or (default is None and name == "routine_batch"):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError("not an integer")
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {name}: {raw!r} ({e})") from e


def _tunable_defaults() -> dict[str, Any]:
    """Defaults of every field a user may set, model and training alike."""
    defaults = {}
    for cls in (ModelConfig, TrainSettings):
        for f in fields(cls):
            if f.name in _VOCABULARY_FIELDS:
                continue
            defaults[f.name] = f.default
    return defaults


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Read a flat JSON or YAML mapping of config fields.

    yaml.safe_load parses JSON as well, so one reader serves both formats.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    unknown = sorted(set(data) - set(_tunable_defaults()))
    if unknown:
        raise ConfigError(f"Unknown keys in {path}: {', '.join(unknown)}")
    return data


def _env_values(load_from_env: bool) -> dict[str, Any]:
    if not load_from_env:
        return {}
    load_dotenv(".env", override=False)
    values = {}
    for name in _tunable_defaults():
        raw = getenv(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None and raw != "":
            values[name] = raw
    return values


def load_run_config(
    config_path: str | Path | None,
    *,
    n_devices: int,
    n_controls: int,
    overrides: dict[str, Any] | None = None,
    load_from_env: bool = True,
) -> tuple[ModelConfig, TrainSettings]:
    """Resolve a ModelConfig and TrainSettings from all configuration layers.

    Args:
        config_path: Optional JSON/YAML file with ModelConfig + TrainSettings keys.
        n_devices: Device vocabulary size of the prepared dataset.
        n_controls: Device-control vocabulary size of the prepared dataset.
        overrides: Highest-precedence values (CLI flags); None entries are ignored.
        load_from_env: Whether to read SMARTSENSE_* variables (and .env).

    Returns:
        (ModelConfig, TrainSettings)
    """
    defaults = _tunable_defaults()
    raw: dict[str, Any] = {}
    raw.update(_env_values(load_from_env))
    if config_path is not None:
        raw.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in defaults:
            raise ConfigError(f"Unknown override: {key}")
        raw[key] = value

    values = {name: _coerce(name, value, defaults[name]) for name, value in raw.items()}
    model_keys = {f.name for f in fields(ModelConfig)}
    model_config = ModelConfig(
        n_devices=n_devices,
        n_controls=n_controls,
        **{k: v for k, v in values.items() if k in model_keys},
    )
    settings = TrainSettings(**{k: v for k, v in values.items() if k not in model_keys})
    logger.debug("Resolved model config: %s", model_config)
    logger.debug("Resolved train settings: %s", settings)
    return model_config, settings
