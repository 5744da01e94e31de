"""Two agents pushing two small boxes north into the top row.

Deterministic dynamics; agents act in index order within a step, so a lower
index claims a contested cell first.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .base import EnvSpec, StepResult, check_joint_action

FORWARD, TURN_LEFT, TURN_RIGHT, STAY = range(4)
NORTH, EAST, SOUTH, WEST = range(4)
HEADING_DELTA = ((-1, 0), (0, 1), (1, 0), (0, -1))
EMPTY, BOX, TEAMMATE, BOUNDARY = range(4)
GOAL_REWARD = 100.0

Pose = tuple[int, int, int]
Cell = tuple[int, int]


@dataclass(frozen=True)
class BoxPushingState:
    agents: tuple[Pose, Pose]
    boxes: tuple[Cell, Cell]
    step_count: int = 0


def initial_layout(n: int) -> BoxPushingState:
    """Boxes on row ceil(n/2) at columns floor(n/3) and ceil(2n/3); each agent
    one row below its box, facing north."""
    row = math.ceil(n / 2)
    cols = (n // 3, math.ceil(2 * n / 3))
    if row + 1 >= n or cols[0] == cols[1]:
        raise ValueError(f"grid size {n} too small for the box layout")
    return BoxPushingState(
        agents=((row + 1, cols[0], NORTH), (row + 1, cols[1], NORTH)),
        boxes=((row, cols[0]), (row, cols[1])),
    )


class BoxPushing:
    """Box Pushing Dec-POMDP. Actions: forward, turn left, turn right, stay.

    Observation: one-hot of the front cell over (empty, box, teammate, boundary).
    """

    n_agents = 2

    def __init__(self, grid_size: int = 6, max_steps: int = 100):
        self.n = grid_size
        self.initial = initial_layout(grid_size)
        self.spec = EnvSpec(f"box_pushing_{grid_size}x{grid_size}", 2, (4, 4), (4, 4), 17, max_steps)
        self.state: BoxPushingState | None = None

    def _inside(self, r: int, c: int) -> bool:
        return 0 <= r < self.n and 0 <= c < self.n

    def encode_state(self, s: BoxPushingState) -> np.ndarray:
        n = self.n
        x = []
        for r, c, h in s.agents:
            heading = [0.0] * 4
            heading[h] = 1.0
            x += [r / n, c / n, *heading]
        for r, c in s.boxes:
            x += [r / n, c / n]
        x.append(s.step_count / self.spec.max_steps)
        return np.array(x)

    def _front(self, s: BoxPushingState, i: int) -> int:
        r, c, h = s.agents[i]
        fr, fc = r + HEADING_DELTA[h][0], c + HEADING_DELTA[h][1]
        if not self._inside(fr, fc):
            return BOUNDARY
        if (fr, fc) in s.boxes:
            return BOX
        other = s.agents[1 - i]
        if (other[0], other[1]) == (fr, fc):
            return TEAMMATE
        return EMPTY

    def observe(self, s: BoxPushingState) -> list[np.ndarray]:
        obs = []
        for i in range(2):
            o = np.zeros(4)
            o[self._front(s, i)] = 1.0
            obs.append(o)
        return obs

    def reset(self, rng: np.random.Generator | None = None) -> StepResult:
        self.state = self.initial
        return StepResult(self.encode_state(self.state), self.observe(self.state), 0.0, False)

    def step(self, joint_action: Sequence[int], rng: np.random.Generator | None = None) -> StepResult:
        if self.state is None:
            raise RuntimeError("step() before reset()")
        joint_action = check_joint_action(self.spec, joint_action)
        agents = list(self.state.agents)
        boxes = list(self.state.boxes)
        goal = False
        for i, a in enumerate(joint_action):
            r, c, h = agents[i]
            if a == TURN_LEFT:
                agents[i] = (r, c, (h - 1) % 4)
            elif a == TURN_RIGHT:
                agents[i] = (r, c, (h + 1) % 4)
            elif a == FORWARD:
                fr, fc = r + HEADING_DELTA[h][0], c + HEADING_DELTA[h][1]
                other = agents[1 - i]
                if not self._inside(fr, fc) or (other[0], other[1]) == (fr, fc):
                    continue
                if (fr, fc) in boxes:
                    if h != NORTH:
                        continue
                    k = boxes.index((fr, fc))
                    dest = (fr - 1, fc)
                    if not self._inside(*dest) or dest in boxes or (other[0], other[1]) == dest:
                        continue
                    boxes[k] = dest
                    goal = goal or dest[0] == 0
                agents[i] = (fr, fc, h)
        self.state = BoxPushingState((agents[0], agents[1]), (boxes[0], boxes[1]), self.state.step_count + 1)
        terminal = goal or self.state.step_count >= self.spec.max_steps
        return StepResult(self.encode_state(self.state), self.observe(self.state),
                          GOAL_REWARD if goal else 0.0, terminal, {"goal": goal})


def _shortest_push(n: int, pose: Pose, boxes: tuple[Cell, Cell], obstacle: Cell) -> int | None:
    """BFS for one agent (teammate frozen at ``obstacle``): fewest steps until a box reaches row 0."""
    start = (pose, boxes)
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        ((r, c, h), bx), d = queue.popleft()
        succ = [((r, c, (h - 1) % 4), bx), ((r, c, (h + 1) % 4), bx)]
        dr, dc = HEADING_DELTA[h]
        fr, fc = r + dr, c + dc
        if 0 <= fr < n and 0 <= fc < n and (fr, fc) != obstacle:
            if (fr, fc) in bx:
                if h == NORTH and fr - 1 >= 0 and (fr - 1, fc) not in bx and (fr - 1, fc) != obstacle:
                    if fr - 1 == 0:
                        return d + 1
                    moved = tuple((fr - 1, fc) if b == (fr, fc) else b for b in bx)
                    succ.append(((fr, fc, h), moved))
            else:
                succ.append(((fr, fc, h), bx))
        for s in succ:
            if s not in seen:
                seen.add(s)
                queue.append((s, d + 1))
    return None


def box_pushing_optimal_return(grid_size: int, gamma: float) -> float:
    """Discounted value ``100 * gamma**(t* - 1)`` of the fastest single-agent push."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    s = initial_layout(grid_size)
    best = None
    for i in range(2):
        other = s.agents[1 - i]
        d = _shortest_push(grid_size, s.agents[i], s.boxes, (other[0], other[1]))
        if d is not None and (best is None or d < best):
            best = d
    if best is None:
        raise RuntimeError(f"no box can reach the goal row on a {grid_size}x{grid_size} layout")
    return GOAL_REWARD * gamma ** (best - 1)
