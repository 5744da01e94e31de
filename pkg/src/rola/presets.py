"""Hyperparameter presets for the in-scope algorithms on each gridworld task.

Values are the best-performing settings from per-task tuning tables. Cells
marked N/A there are left at the config default and listed in
``not_applicable``. ECA has no column of its own; its presets reuse the ROLA
column of the same task.
"""
from __future__ import annotations

from dataclasses import dataclass

from .trainer.config import ExperimentConfig

# table column -> fields; None marks an N/A cell
_TABLE_FIELDS = (
    "training_episodes", "actor_lr", "critic_lr", "episodes_per_train", "target_update_freq", "n_step",
    "num_centralized_critic_updates", "num_local_critic_updates", "eps_start", "eps_end", "eps_decay",
    "td_lambda",
)

_TABLES: dict[tuple[str, int], dict[str, tuple]] = {
    ("capture_target", 6): {
        "rola":      (100_000, 5e-4, 5e-4, 2, 16, 3, 1, 1, 1.0, 0.05, 15_000, None),
        "coma":      (100_000, 5e-4, 1e-3, 8, 32, None, 1, None, 1.0, 0.05, 15_000, 0.3),
        "central_v": (100_000, 3e-4, 3e-3, 8, 16, 1, 1, None, 1.0, 0.05, 15_000, None),
        "ia2c":      (100_000, 5e-4, 5e-4, 2, 32, 1, None, 1, 1.0, 0.05, 15_000, None),
    },
    ("capture_target", 8): {
        "rola":      (200_000, 5e-4, 5e-4, 2, 64, 3, 1, 1, 1.0, 0.05, 15_000, None),
        "coma":      (200_000, 5e-4, 1e-3, 8, 64, None, 1, None, 1.0, 0.05, 15_000, 0.3),
        "central_v": (200_000, 3e-4, 3e-3, 8, 16, 1, 1, None, 1.0, 0.05, 15_000, None),
        "ia2c":      (200_000, 5e-4, 5e-4, 8, 64, 1, None, 1, 1.0, 0.05, 15_000, None),
    },
    ("box_pushing", 6): {
        "rola":      (4_000, 1e-3, 3e-3, 2, 32, 3, 1, 4, 1.0, 0.01, 2_000, None),
        "coma":      (4_000, 1e-3, 3e-3, 8, 16, None, 1, None, 1.0, 0.01, 2_000, 0.4),
        "central_v": (4_000, 1e-3, 5e-3, 2, 64, 3, 1, None, 1.0, 0.01, 2_000, None),
        "ia2c":      (4_000, 1e-3, 5e-3, 2, 32, 5, None, 1, 1.0, 0.01, 2_000, None),
    },
    ("box_pushing", 10): {
        "rola":      (4_000, 5e-4, 1e-3, 2, 16, 1, 1, 4, 1.0, 0.01, 4_000, None),
        "coma":      (4_000, 3e-4, 3e-3, 8, 16, None, 1, None, 1.0, 0.01, 4_000, 0.4),
        "central_v": (4_000, 5e-4, 5e-4, 4, 16, 1, 1, None, 1.0, 0.01, 4_000, None),
        "ia2c":      (4_000, 1e-3, 3e-3, 2, 64, 5, None, 1, 1.0, 0.01, 4_000, None),
    },
}

_DOMAIN_SLUG = {"capture_target": "capture", "box_pushing": "boxpush"}
_ALG_SLUG = {"rola": "rola", "coma": "coma", "central_v": "central-v", "ia2c": "ia2c", "eca": "eca"}


@dataclass(frozen=True)
class Preset:
    name: str
    values: dict
    source: str
    not_applicable: tuple[str, ...] = ()
    notes: str = ""

    def config(self, **overrides) -> ExperimentConfig:
        return ExperimentConfig(**{**self.values, **overrides})


def _build() -> dict[str, Preset]:
    presets: dict[str, Preset] = {}
    for (env, size), columns in _TABLES.items():
        task = f"{_DOMAIN_SLUG[env]}-{size}x{size}"
        for alg in ("rola", "coma", "central_v", "ia2c", "eca"):
            column = "rola" if alg == "eca" else alg
            cells = dict(zip(_TABLE_FIELDS, columns[column]))
            values = {"env": env, "grid_size": size, "algorithm": alg, "trials": 20,
                      "eval_interval": 100, "eval_episodes": 10}
            values.update({k: v for k, v in cells.items() if v is not None})
            name = f"{_ALG_SLUG[alg]}-{task}"
            presets[name] = Preset(
                name, values,
                source=f"{env.replace('_', ' ')} {size}x{size} table, {column} column",
                not_applicable=tuple(k for k, v in cells.items() if v is None and k != "td_lambda"),
                notes="no ECA column in the tables; copied from ROLA" if alg == "eca" else "",
            )
    # small sanity task, not from the tables
    presets["rola-matrix-2x2"] = Preset(
        "rola-matrix-2x2",
        {"env": "matrix_game", "payoff": [[1.0, 0.0], [0.0, 1.0]], "algorithm": "rola",
         "training_episodes": 2_000, "actor_lr": 5e-3, "critic_lr": 5e-3, "episodes_per_train": 2,
         "target_update_freq": 16, "n_step": 1, "eps_start": 1.0, "eps_end": 0.05, "eps_decay": 1_000,
         "eval_interval": 100, "eval_episodes": 10, "trials": 5},
        source="hand-tuned one-step coordination game (not from the tables)",
    )
    return presets


PRESETS: dict[str, Preset] = _build()


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
