"""One-shot cooperative matrix game."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .base import EnvSpec, StepResult, check_joint_action


class MatrixGame:
    """Two agents, one step, shared reward ``payoff[a1][a2]``.

    State and observations are the constant vector ``[1.0]``.
    """

    n_agents = 2

    def __init__(self, payoff):
        payoff = np.asarray(payoff, dtype=float)
        if payoff.ndim != 2 or payoff.size == 0:
            raise ValueError(f"payoff must be a non-empty 2-D matrix, got shape {payoff.shape}")
        self.payoff = payoff
        self.spec = EnvSpec(f"matrix_game_{payoff.shape[0]}x{payoff.shape[1]}", 2, payoff.shape, (1, 1), 1, 1)
        self.state = 0

    def _result(self, reward: float, terminal: bool) -> StepResult:
        return StepResult(np.ones(1), [np.ones(1), np.ones(1)], reward, terminal)

    def reset(self, rng: np.random.Generator | None = None) -> StepResult:
        self.state = 0
        return self._result(0.0, False)

    def step(self, joint_action: Sequence[int], rng: np.random.Generator | None = None) -> StepResult:
        a1, a2 = check_joint_action(self.spec, joint_action)
        self.state = 1
        return self._result(float(self.payoff[a1, a2]), True)

    def enumerate_states(self) -> list[int]:
        return [0]

    def transition_distribution(self, s: int, joint_action: Sequence[int]):
        a1, a2 = check_joint_action(self.spec, joint_action)
        return [(1.0, 1, float(self.payoff[a1, a2]), True)]
