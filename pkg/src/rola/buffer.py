"""On-policy episode storage and its padded array view."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    observations: list[np.ndarray]
    joint_action: tuple[int, ...]
    reward: float
    next_observations: list[np.ndarray]
    next_state: np.ndarray
    terminal: bool


@dataclass
class Batch:
    """Episodes padded to a common length ``T``.

    ``states`` and ``obs[i]`` have ``T + 1`` time slots (the successor of the
    last transition included); ``actions``, ``rewards`` and ``mask`` have ``T``.
    """

    states: np.ndarray          # (E, T+1, state_dim)
    obs: list[np.ndarray]       # per agent (E, T+1, obs_dim)
    actions: np.ndarray         # (E, T, n_agents) int
    rewards: np.ndarray         # (E, T)
    mask: np.ndarray            # (E, T) bool
    lengths: np.ndarray         # (E,)
    terminal: np.ndarray        # (E,) bool, last transition terminal

    @property
    def n_episodes(self) -> int:
        return self.rewards.shape[0]

    @property
    def horizon(self) -> int:
        return self.rewards.shape[1]

    def actor_inputs(self, agent: int, n_actions: int) -> np.ndarray:
        """Time-major ``(T+1, E, obs_dim + n_actions)``: observation plus one-hot previous own action."""
        E, T1, od = self.obs[agent].shape
        x = np.zeros((T1, E, od + n_actions))
        x[:, :, :od] = self.obs[agent].transpose(1, 0, 2)
        for e in range(E):
            L = self.lengths[e]
            x[np.arange(1, L + 1), e, od + self.actions[e, :L, agent]] = 1.0
        return x


class EpisodeBuffer:
    """Buffer B: complete episodes of transitions, emptied after each training pass."""

    def __init__(self):
        self.episodes: list[list[Transition]] = []
        self._current: list[Transition] = []

    def add(self, tr: Transition) -> None:
        self._current.append(tr)
        if tr.terminal:
            self.end_episode()

    def end_episode(self) -> None:
        if self._current:
            self.episodes.append(self._current)
            self._current = []

    def __len__(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def clear(self) -> None:
        self.episodes = []
        self._current = []

    def batch(self) -> Batch:
        if not self.episodes:
            raise ValueError("empty buffer")
        E = len(self.episodes)
        T = max(len(ep) for ep in self.episodes)
        first = self.episodes[0][0]
        n_agents = len(first.joint_action)
        states = np.zeros((E, T + 1, first.state.size))
        obs = [np.zeros((E, T + 1, o.size)) for o in first.observations]
        actions = np.zeros((E, T, n_agents), dtype=np.int64)
        rewards = np.zeros((E, T))
        mask = np.zeros((E, T), dtype=bool)
        lengths = np.zeros(E, dtype=np.int64)
        terminal = np.zeros(E, dtype=bool)
        for e, ep in enumerate(self.episodes):
            L = len(ep)
            lengths[e] = L
            terminal[e] = ep[-1].terminal
            mask[e, :L] = True
            for t, tr in enumerate(ep):
                states[e, t] = tr.state
                actions[e, t] = tr.joint_action
                rewards[e, t] = tr.reward
                for i, o in enumerate(tr.observations):
                    obs[i][e, t] = o
            states[e, L] = ep[-1].next_state
            for i, o in enumerate(ep[-1].next_observations):
                obs[i][e, L] = o
        return Batch(states, obs, actions, rewards, mask, lengths, terminal)
