"""The on-policy training loop for a single trial, and greedy-mode evaluation."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ..buffer import EpisodeBuffer, Transition
from ..envs import make_env
from ..numerics import NumericalError, RecurrentNet, save_checkpoint
from ..policy import Actor, act, epsilon_schedule
from .config import ExperimentConfig
from .learners import Learner, make_learner

log = logging.getLogger(__name__)

STREAMS = ("init", "env", "explore", "eval", "sampling")


@dataclass
class MetricsRow:
    trial: int
    episode: int
    eval_mean_discounted_return: float
    epsilon: float
    centralized_critic_loss: float
    mean_local_critic_loss: float
    actor_loss: float
    wall_time: float


METRIC_COLUMNS = [f.name for f in fields(MetricsRow)]


def trial_streams(trial_seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators split from one trial seed."""
    children = np.random.SeedSequence(trial_seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def build_env(cfg: ExperimentConfig):
    return make_env(cfg.env, cfg.grid_size, cfg.payoff)


def rollout(env, actors: Sequence[Actor] | Sequence[RecurrentNet], epsilon: float,
            env_rng: np.random.Generator, act_rng: np.random.Generator,
            buffer: EpisodeBuffer | None = None) -> list[float]:
    """Play one episode; returns the reward sequence (and fills ``buffer``)."""
    nets = [a.net if isinstance(a, Actor) else a for a in actors]
    counts = env.spec.action_counts
    res = env.reset(env_rng)
    hidden = [net.initial_state(1) for net in nets]
    prev: list[int | None] = [None] * len(nets)
    rewards = []
    for _ in range(env.spec.max_steps):
        joint = []
        for i, net in enumerate(nets):
            od = res.observations[i].size
            x = np.zeros((1, od + counts[i]))
            x[0, :od] = res.observations[i]
            if prev[i] is not None:
                x[0, od + prev[i]] = 1.0
            a, hidden[i], _ = act(net, x, hidden[i], epsilon, act_rng)
            joint.append(a)
        nxt = env.step(joint, env_rng)
        rewards.append(nxt.reward)
        if buffer is not None:
            buffer.add(Transition(res.state, res.observations, tuple(joint), nxt.reward,
                                  nxt.observations, nxt.state, nxt.terminal))
        prev = joint
        res = nxt
        if nxt.terminal:
            break
    if buffer is not None:
        buffer.end_episode()
    return rewards


def discounted(rewards: Sequence[float], gamma: float) -> float:
    g = 0.0
    for r in reversed(rewards):
        g = r + gamma * g
    return g


def evaluate(actors, env, eval_episodes: int, gamma: float, rng: np.random.Generator) -> float:
    """Mean discounted return of ``eval_episodes`` runs with epsilon 0
    (actions still sampled from each policy's softmax)."""
    total = 0.0
    for _ in range(eval_episodes):
        total += discounted(rollout(env, actors, 0.0, rng, rng), gamma)
    return total / eval_episodes


def _mean(xs: list[float]) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.mean(xs)) if xs else math.nan


class Trial:
    """State of one trial; ``run`` executes the whole training schedule."""

    def __init__(self, cfg: ExperimentConfig, trial_seed: int, trial_index: int = 0,
                 out_dir: str | Path | None = None, evaluate_enabled: bool = True):
        self.cfg = cfg
        self.trial_seed = trial_seed
        self.trial_index = trial_index
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.evaluate_enabled = evaluate_enabled
        self.rngs = trial_streams(trial_seed)
        self.env = build_env(cfg)
        self.eval_env = build_env(cfg)
        self.learner: Learner = make_learner(self.env.spec, cfg, self.rngs["init"])
        self.buffer = EpisodeBuffer()
        self.rows: list[MetricsRow] = []
        self.best_return = -math.inf
        self.train_passes = 0
        # hooks for tests: called with (trial, episode) after each phase
        self.after_train = None
        self.after_sync = None
        self.after_episode = None
        self.on_row = None

    def checkpoint_metadata(self, episode: int, eval_return: float | None = None) -> dict:
        return {"config": self.cfg.to_dict(), "episode": episode, "trial": self.trial_index,
                "trial_seed": self.trial_seed, "eval_return": eval_return,
                "n_agents": self.env.spec.n_agents}

    def _save(self, name: str, episode: int, eval_return: float | None) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.out_dir / name, self.learner.networks(), self.checkpoint_metadata(episode, eval_return))

    def run(self) -> list[MetricsRow]:
        cfg = self.cfg
        start = time.perf_counter()
        pending = {"central": [], "local": [], "actor": []}
        rngs = self.rngs
        for episode in range(1, cfg.training_episodes + 1):
            eps = epsilon_schedule(episode - 1, cfg.eps_start, cfg.eps_end, cfg.eps_decay)
            rollout(self.env, self.learner.actors, eps, rngs["env"], rngs["explore"], self.buffer)
            if self.after_episode:
                self.after_episode(self, episode)

            if episode % cfg.episodes_per_train == 0:
                try:
                    losses = self.learner.train(self.buffer.batch(), rngs["sampling"])
                except NumericalError:
                    tag = f"diagnostic_trial{self.trial_index:03d}_ep{episode}.npz"
                    self._save(tag, episode, None)
                    log.error("trial %d: non-finite values at episode %d; snapshot %s",
                              self.trial_index, episode, tag)
                    raise
                for k, v in losses.items():
                    pending[k].append(v)
                self.buffer.clear()
                self.train_passes += 1
                if self.after_train:
                    self.after_train(self, episode)

            if episode % cfg.target_update_freq == 0:
                self.learner.sync_targets()
                if self.after_sync:
                    self.after_sync(self, episode)

            if episode % cfg.eval_interval == 0:
                ret = (evaluate(self.learner.actors, self.eval_env, cfg.eval_episodes, cfg.gamma, rngs["eval"])
                       if self.evaluate_enabled else math.nan)
                self.rows.append(MetricsRow(
                    self.trial_index, episode, ret, eps,
                    _mean(pending["central"]), _mean(pending["local"]), _mean(pending["actor"]),
                    time.perf_counter() - start))
                pending = {k: [] for k in pending}
                if self.on_row:
                    self.on_row(self.rows[-1])
                self._checkpoint(episode, ret)
        return self.rows

    def _checkpoint(self, episode: int, ret: float) -> None:
        keep = self.cfg.keep_checkpoints
        if self.out_dir is None or keep == "none":
            return
        stem = f"trial{self.trial_index:03d}"
        if keep == "all":
            self._save(f"{stem}_ep{episode}.npz", episode, ret)
        self._save(f"{stem}_last.npz", episode, ret)
        if ret > self.best_return:
            self.best_return = ret
            self._save(f"{stem}_best.npz", episode, ret)


def run_trial(cfg: ExperimentConfig, trial_seed: int, trial_index: int = 0,
              out_dir: str | Path | None = None) -> list[MetricsRow]:
    return Trial(cfg, trial_seed, trial_index, out_dir).run()
