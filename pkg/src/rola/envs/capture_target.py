"""Two agents on an n x n torus trying to land on an eastward-drifting target."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .base import EnvSpec, StepResult, check_joint_action

UP, DOWN, LEFT, RIGHT, STAY = range(5)
ACTION_NAMES = ("up", "down", "left", "right", "stay")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
NEIGHBOURS = MOVES[:4]

Pos = tuple[int, int]


@dataclass(frozen=True)
class CaptureTargetState:
    agent_positions: tuple[Pos, Pos]
    target_position: Pos
    step_count: int = 0


class CaptureTarget:
    """Capture Target Dec-POMDP.

    Each agent lands on its intended cell with probability ``1 - noise`` and on
    a uniformly random von-Neumann neighbour of its current cell otherwise. The
    target shifts one column east every step. Reward 1 (and termination) when
    both agents share the target's cell after everyone has moved.

    Observation per agent: ``[row/n, col/n, tgt_row/n, tgt_col/n, visible]``;
    the target slot is zero-filled with ``visible = 0`` when the independent
    ``obs_prob`` draw fails.
    """

    n_agents = 2

    def __init__(self, grid_size: int = 6, noise: float = 0.1, obs_prob: float = 0.7, max_steps: int = 60):
        if grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        self.n = grid_size
        self.noise = noise
        self.obs_prob = obs_prob
        self.spec = EnvSpec(f"capture_target_{grid_size}x{grid_size}", 2, (5, 5), (5, 5), 7, max_steps)
        self.state: CaptureTargetState | None = None

    def _move(self, pos: Pos, delta: tuple[int, int]) -> Pos:
        return ((pos[0] + delta[0]) % self.n, (pos[1] + delta[1]) % self.n)

    def encode_state(self, s: CaptureTargetState) -> np.ndarray:
        (a, b), t = s.agent_positions, s.target_position
        n = self.n
        return np.array([a[0] / n, a[1] / n, b[0] / n, b[1] / n, t[0] / n, t[1] / n,
                         s.step_count / self.spec.max_steps])

    def _observe(self, s: CaptureTargetState, rng: np.random.Generator) -> list[np.ndarray]:
        n = self.n
        obs = []
        for pos in s.agent_positions:
            o = np.zeros(5)
            o[0], o[1] = pos[0] / n, pos[1] / n
            if rng.random() < self.obs_prob:
                o[2], o[3] = s.target_position[0] / n, s.target_position[1] / n
                o[4] = 1.0
            obs.append(o)
        return obs

    def reset(self, rng: np.random.Generator) -> StepResult:
        cells = rng.choice(self.n * self.n, size=3, replace=False)
        pos = [(int(c) // self.n, int(c) % self.n) for c in cells]
        self.state = CaptureTargetState((pos[0], pos[1]), pos[2], 0)
        return StepResult(self.encode_state(self.state), self._observe(self.state, rng), 0.0, False)

    def step(self, joint_action: Sequence[int], rng: np.random.Generator | None = None) -> StepResult:
        if self.state is None:
            raise RuntimeError("step() before reset()")
        if rng is None:
            raise ValueError("capture target needs an rng for transition and observation noise")
        joint_action = check_joint_action(self.spec, joint_action)
        s = self.state
        new_pos = []
        displaced = []
        for pos, a in zip(s.agent_positions, joint_action):
            if rng.random() < self.noise:
                new_pos.append(self._move(pos, NEIGHBOURS[int(rng.integers(4))]))
                displaced.append(True)
            else:
                new_pos.append(self._move(pos, MOVES[a]))
                displaced.append(False)
        target = self._move(s.target_position, (0, 1))
        self.state = CaptureTargetState((new_pos[0], new_pos[1]), target, s.step_count + 1)
        captured = new_pos[0] == target and new_pos[1] == target
        terminal = captured or self.state.step_count >= self.spec.max_steps
        obs = self._observe(self.state, rng)
        return StepResult(self.encode_state(self.state), obs, 1.0 if captured else 0.0, terminal,
                          {"displaced": displaced, "captured": captured})

    # exact model, used only by the brute-force oracle

    def enumerate_states(self) -> list[CaptureTargetState]:
        cells = [(r, c) for r in range(self.n) for c in range(self.n)]
        return [CaptureTargetState((a, b), t) for a in cells for b in cells for t in cells]

    def transition_distribution(self, s: CaptureTargetState, joint_action: Sequence[int]):
        """``[(prob, next_state, reward, terminal)]`` for one step, ignoring the step counter."""
        joint_action = check_joint_action(self.spec, joint_action)
        per_agent = []
        for pos, a in zip(s.agent_positions, joint_action):
            dist: dict[Pos, float] = {}
            if self.noise < 1.0:
                dest = self._move(pos, MOVES[a])
                dist[dest] = dist.get(dest, 0.0) + (1.0 - self.noise)
            if self.noise > 0.0:
                for d in NEIGHBOURS:
                    dest = self._move(pos, d)
                    dist[dest] = dist.get(dest, 0.0) + self.noise / 4
            per_agent.append(dist)
        target = self._move(s.target_position, (0, 1))
        out = []
        for p0, q0 in per_agent[0].items():
            for p1, q1 in per_agent[1].items():
                captured = p0 == target and p1 == target
                out.append((q0 * q1, replace(s, agent_positions=(p0, p1), target_position=target),
                            1.0 if captured else 0.0, captured))
        return out
