"""Shared environment types."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    n_agents: int
    action_counts: tuple[int, ...]
    obs_dims: tuple[int, ...]
    state_dim: int
    max_steps: int

    def __post_init__(self):
        if self.n_agents < 1 or len(self.action_counts) != self.n_agents or len(self.obs_dims) != self.n_agents:
            raise ValueError(f"inconsistent agent counts in {self}")
        if min(self.action_counts) < 1 or min(self.obs_dims) < 1 or self.state_dim < 1:
            raise ValueError(f"all counts must be positive: {self}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def n_joint_actions(self) -> int:
        return int(np.prod(self.action_counts))


@dataclass
class StepResult:
    state: np.ndarray
    observations: list[np.ndarray]
    reward: float
    terminal: bool
    info: dict[str, Any] = field(default_factory=dict)


class Env(Protocol):
    spec: EnvSpec

    def reset(self, rng: np.random.Generator) -> StepResult: ...

    def step(self, joint_action: Sequence[int], rng: np.random.Generator | None = None) -> StepResult: ...


def check_joint_action(spec: EnvSpec, joint_action: Sequence[int]) -> tuple[int, ...]:
    if len(joint_action) != spec.n_agents:
        raise ValueError(f"{spec.name}: expected {spec.n_agents} actions, got {list(joint_action)}")
    out = []
    for i, a in enumerate(joint_action):
        a = int(a)
        if not 0 <= a < spec.action_counts[i]:
            raise ValueError(f"{spec.name}: agent {i} action {a} outside [0, {spec.action_counts[i]})")
        out.append(a)
    return tuple(out)
