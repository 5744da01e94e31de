from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, get_type_hints

from ..envs import ENV_NAMES
from ..estimators import ALGORITHMS


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Every knob of one training run.

    Defaults: evaluation every 100 episodes over 10 episodes, 20 trials,
    gamma 0.99.
    """

    env: str = "box_pushing"
    grid_size: int = 6
    payoff: Optional[list] = None
    algorithm: str = "rola"
    gamma: float = 0.99
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    episodes_per_train: int = 2
    target_update_freq: int = 32
    n_step: int = 1
    td_lambda: Optional[float] = None
    num_local_critic_updates: int = 1
    num_centralized_critic_updates: int = 1
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: int = 15_000
    training_episodes: int = 100_000
    eval_interval: int = 100
    eval_episodes: int = 10
    trials: int = 20
    seed: int = 0
    output: Optional[str] = None
    hidden: int = 64
    entropy_weight: float = 0.0
    clip_norm: Optional[float] = 10.0
    softmax_temperature: float = 1.0
    joint_action_cap: int = 10_000
    keep_checkpoints: str = "last_best"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"env must be one of {ENV_NAMES}, got {self.env!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.env == "matrix_game" and not self.payoff:
            raise ConfigError("matrix_game needs a payoff matrix")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        for name in ("actor_lr", "critic_lr", "episodes_per_train", "target_update_freq", "n_step",
                     "num_local_critic_updates", "num_centralized_critic_updates", "eps_decay",
                     "eval_interval", "eval_episodes", "trials", "hidden", "softmax_temperature"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.training_episodes < 0:
            raise ConfigError("training_episodes must be >= 0")
        if self.algorithm == "coma" and self.td_lambda is None:
            raise ConfigError("coma trains its critic with TD(lambda); set td_lambda")
        if self.td_lambda is not None and not 0.0 <= self.td_lambda <= 1.0:
            raise ConfigError(f"td_lambda must be in [0, 1], got {self.td_lambda}")
        for name in ("eps_start", "eps_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.keep_checkpoints not in ("last_best", "all", "none"):
            raise ConfigError("keep_checkpoints must be last_best, all or none")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def config_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]


def _coerce(key: str, value: Any, line: str | None = None) -> Any:
    """Check/convert ``value`` against the declared type of ``key``."""
    hint = get_type_hints(ExperimentConfig)[key]
    optional = getattr(hint, "__args__", None) is not None and type(None) in hint.__args__
    base = next((a for a in getattr(hint, "__args__", ()) if a is not type(None)), hint) if optional else hint
    where = f" (at: {line.strip()})" if line else ""
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{key} may not be null{where}")
    if base is bool:
        if isinstance(value, bool):
            return value
    elif base is int:
        if isinstance(value, bool):
            pass
        elif isinstance(value, int):
            return value
        elif isinstance(value, float) and value.is_integer():
            return int(value)
    elif base is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif base is str:
        if isinstance(value, str):
            return value
    elif base is list:
        if isinstance(value, list):
            return value
    raise ConfigError(f"{key}: expected {getattr(base, '__name__', base)}, got {value!r}{where}")


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with a JSON value (bare words fall back to strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: dict[str, Any], overrides: dict[str, Any], source_lines: dict[str, str] | None = None):
    valid = config_keys()
    out = dict(data)
    for key, value in overrides.items():
        if key not in valid:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(valid)}")
        out[key] = _coerce(key, value, (source_lines or {}).get(key))
    return out


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a JSON config file, keeping each key's source line for error messages."""
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    lines = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        for key in data:
            if f'"{key}"' in line and key not in lines:
                lines[key] = f"{path}:{lineno}: {line}"
    return apply_overrides({}, data, lines)


def build_config(base: dict[str, Any], overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    merged = apply_overrides(base, overrides or {})
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
