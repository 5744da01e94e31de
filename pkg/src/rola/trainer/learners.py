"""One learner per estimator: what a training pass updates and in which order."""
from __future__ import annotations

import math

import numpy as np

from ..buffer import Batch
from ..critics import (
    Critic, centralized_td_target, critic_update, joint_index, lambda_return, local_td_target, nstep_targets,
)
from ..envs import EnvSpec
from ..estimators import central_v_advantage, coma_advantage, eca_advantage, ia2c_advantage, rola_advantage
from ..numerics import Network, UnsupportedConfiguration
from ..policy import Actor, policy_gradient_step
from .config import ExperimentConfig


class Learner:
    """Decentralized actors plus whatever critics an estimator needs."""

    def __init__(self, spec: EnvSpec, cfg: ExperimentConfig, rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.actors = [
            Actor(spec.obs_dims[i], spec.action_counts[i], cfg.actor_lr, rng, cfg.hidden, cfg.clip_norm,
                  name=f"actor{i}")
            for i in range(spec.n_agents)
        ]

    def critics(self) -> dict[str, Critic]:
        return {}

    def networks(self) -> dict[str, Network]:
        nets: dict[str, Network] = {}
        for i, actor in enumerate(self.actors):
            nets[f"actor{i}"] = actor.net
            nets[f"actor{i}_target"] = actor.target
        for name, critic in self.critics().items():
            nets[name] = critic.net
            nets[f"{name}_target"] = critic.target
        return nets

    def sync_targets(self) -> None:
        for actor in self.actors:
            actor.sync_targets()
        for critic in self.critics().values():
            critic.sync_targets()

    def train(self, batch: Batch, rng: np.random.Generator) -> dict[str, float]:
        raise NotImplementedError

    # shared pieces

    def _inputs(self, batch: Batch) -> list[np.ndarray]:
        return [batch.actor_inputs(i, self.spec.action_counts[i]) for i in range(self.spec.n_agents)]

    def _flat_states(self, batch: Batch, with_last: bool = False) -> np.ndarray:
        s = batch.states if with_last else batch.states[:, :-1]
        return s.reshape(-1, s.shape[-1])

    def _update_actors(self, batch: Batch, inputs: list[np.ndarray], advantages: list[np.ndarray]) -> float:
        """``advantages[i]`` is ``(E, T)`` at the taken actions."""
        losses = []
        mask = batch.mask.T
        for i, actor in enumerate(self.actors):
            losses.append(policy_gradient_step(
                actor, inputs[i][:-1], batch.actions[:, :, i].T, advantages[i].T, mask, self.cfg.entropy_weight))
        return float(np.mean(losses))

    def _current_policies(self, inputs: list[np.ndarray]) -> list[np.ndarray]:
        """Current action probabilities ``(E, T, A_i)`` for every agent."""
        return [actor.policy(x[:-1]).transpose(1, 0, 2) for actor, x in zip(self.actors, inputs)]


class CentralQLearner(Learner):
    """Shared by ROLA and ECA: a joint-action critic trained on n-step targets
    that bootstrap through the delayed actors' sampled next actions."""

    def __init__(self, spec, cfg, rng):
        super().__init__(spec, cfg, rng)
        n_joint = spec.n_joint_actions
        if n_joint > cfg.joint_action_cap:
            raise UnsupportedConfiguration(f"{n_joint} joint actions exceeds the cap of {cfg.joint_action_cap}")
        self.central = Critic(spec.state_dim, n_joint, cfg.critic_lr, rng, cfg.hidden,
                              clip_norm=cfg.clip_norm, name="central")

    def critics(self):
        return {"central": self.central}

    def _train_central(self, batch: Batch, inputs: list[np.ndarray], rng: np.random.Generator) -> float:
        cfg = self.cfg
        target_pol = [actor.policy(x, target=True) for actor, x in zip(self.actors, inputs)]
        taken = joint_index(batch.actions, self.spec.action_counts)[batch.mask]
        x = batch.states[:, :-1][batch.mask]
        losses = []
        for _ in range(cfg.num_centralized_critic_updates):
            y = centralized_td_target(batch, self.central.target, target_pol, cfg.gamma, rng, cfg.n_step)
            losses.append(critic_update(self.central, x, y[batch.mask], taken))
        return float(np.mean(losses))


class RolaLearner(CentralQLearner):
    def __init__(self, spec, cfg, rng):
        super().__init__(spec, cfg, rng)
        self.local = [
            Critic(spec.state_dim, spec.action_counts[i], cfg.critic_lr, rng, cfg.hidden,
                   clip_norm=cfg.clip_norm, name=f"local{i}")
            for i in range(spec.n_agents)
        ]

    def critics(self):
        return {"central": self.central, **{f"local{i}": c for i, c in enumerate(self.local)}}

    def train(self, batch, rng):
        cfg = self.cfg
        inputs = self._inputs(batch)
        central_loss = self._train_central(batch, inputs, rng)

        x = batch.states[:, :-1][batch.mask]
        local_losses = []
        for i, critic in enumerate(self.local):
            a_i = batch.actions[:, :, i][batch.mask]
            for _ in range(cfg.num_local_critic_updates):
                # fresh joint-action samples every pass
                y = local_td_target(batch, i, critic.target, self.central.net, self.spec.action_counts,
                                    cfg.gamma, rng, cfg.n_step, cfg.softmax_temperature, cfg.joint_action_cap)
                local_losses.append(critic_update(critic, x, y[batch.mask], a_i))

        policies = self._current_policies(inputs)
        E, T = batch.rewards.shape
        states = self._flat_states(batch)
        advantages = []
        for i, critic in enumerate(self.local):
            q_loc = critic.net.predict(states).reshape(E, T, -1)
            adv = rola_advantage(q_loc, policies[i])
            advantages.append(np.take_along_axis(adv, batch.actions[:, :, i][..., None], -1)[..., 0] * batch.mask)
        actor_loss = self._update_actors(batch, inputs, advantages)
        return {"central": central_loss, "local": float(np.mean(local_losses)), "actor": actor_loss}


class EcaLearner(CentralQLearner):
    def train(self, batch, rng):
        inputs = self._inputs(batch)
        central_loss = self._train_central(batch, inputs, rng)
        policies = self._current_policies(inputs)
        E, T = batch.rewards.shape
        q = self.central.net.predict(self._flat_states(batch)).reshape(E, T, -1)
        advantages = []
        for i in range(self.spec.n_agents):
            adv = eca_advantage(q, i, policies, self.spec.action_counts, self.cfg.joint_action_cap)
            advantages.append(np.take_along_axis(adv, batch.actions[:, :, i][..., None], -1)[..., 0] * batch.mask)
        actor_loss = self._update_actors(batch, inputs, advantages)
        return {"central": central_loss, "local": math.nan, "actor": actor_loss}


class ComaLearner(Learner):
    """Joint-action critic trained on TD(lambda) targets from the target
    critic at the taken joint actions; counterfactual-baseline actors."""

    def __init__(self, spec, cfg, rng):
        super().__init__(spec, cfg, rng)
        self.central = Critic(spec.state_dim, spec.n_joint_actions, cfg.critic_lr, rng, cfg.hidden,
                              clip_norm=cfg.clip_norm, name="central")

    def critics(self):
        return {"central": self.central}

    def train(self, batch, rng):
        cfg = self.cfg
        counts = self.spec.action_counts
        E, T = batch.rewards.shape
        states = self._flat_states(batch)
        taken = joint_index(batch.actions, counts)
        losses = []
        for _ in range(cfg.num_centralized_critic_updates):
            q_t = self.central.target.predict(states).reshape(E, T, -1)
            v_taken = np.take_along_axis(q_t, taken[..., None], -1)[..., 0]
            y = np.zeros((E, T))
            for e in range(E):
                L = int(batch.lengths[e])
                y[e, :L] = lambda_return(batch.rewards[e, :L], v_taken[e, :L], cfg.gamma, cfg.td_lambda)
            losses.append(critic_update(self.central, batch.states[:, :-1][batch.mask], y[batch.mask],
                                        taken[batch.mask]))
        inputs = self._inputs(batch)
        policies = self._current_policies(inputs)
        q = self.central.net.predict(states).reshape(E, T, -1)
        advantages = [coma_advantage(q, batch.actions, i, policies[i], counts) * batch.mask
                      for i in range(self.spec.n_agents)]
        actor_loss = self._update_actors(batch, inputs, advantages)
        return {"central": float(np.mean(losses)), "local": math.nan, "actor": actor_loss}


class CentralVLearner(Learner):
    def __init__(self, spec, cfg, rng):
        super().__init__(spec, cfg, rng)
        self.value = Critic(spec.state_dim, 1, cfg.critic_lr, rng, cfg.hidden, clip_norm=cfg.clip_norm,
                            name="value")

    def critics(self):
        return {"value": self.value}

    def train(self, batch, rng):
        cfg = self.cfg
        E, T1, _ = batch.states.shape
        flat = batch.states.reshape(E * T1, -1)
        x = batch.states[:, :-1][batch.mask]
        losses = []
        for _ in range(cfg.num_centralized_critic_updates):
            boot = self.value.target.predict(flat)[:, 0].reshape(E, T1)
            y = nstep_targets(batch, boot, cfg.gamma, cfg.n_step)
            losses.append(critic_update(self.value, x, y[batch.mask]))
        adv = central_v_advantage(self.value, batch, cfg.gamma, cfg.n_step)
        inputs = self._inputs(batch)
        actor_loss = self._update_actors(batch, inputs, [adv] * self.spec.n_agents)
        return {"central": float(np.mean(losses)), "local": math.nan, "actor": actor_loss}


class IA2CLearner(Learner):
    """Independent learners: each agent's recurrent value critic sees only its
    own action-observation history."""

    def __init__(self, spec, cfg, rng):
        super().__init__(spec, cfg, rng)
        self.values = [
            Critic(spec.obs_dims[i] + spec.action_counts[i], 1, cfg.critic_lr, rng, cfg.hidden,
                   recurrent=True, clip_norm=cfg.clip_norm, name=f"value{i}")
            for i in range(spec.n_agents)
        ]

    def critics(self):
        return {f"value{i}": c for i, c in enumerate(self.values)}

    def train(self, batch, rng):
        cfg = self.cfg
        inputs = self._inputs(batch)
        mask = batch.mask.T
        losses, advantages = [], []
        for i, critic in enumerate(self.values):
            for _ in range(cfg.num_local_critic_updates):
                boot = critic.target.predict(inputs[i])[..., 0].T
                y = nstep_targets(batch, boot, cfg.gamma, cfg.n_step)
                losses.append(critic_update(critic, inputs[i][:-1], y.T, mask=mask))
            advantages.append(ia2c_advantage(critic, inputs[i], batch, cfg.gamma, cfg.n_step))
        actor_loss = self._update_actors(batch, inputs, advantages)
        return {"central": math.nan, "local": float(np.mean(losses)), "actor": actor_loss}


LEARNERS = {
    "rola": RolaLearner,
    "eca": EcaLearner,
    "coma": ComaLearner,
    "central_v": CentralVLearner,
    "ia2c": IA2CLearner,
}


def make_learner(spec: EnvSpec, cfg: ExperimentConfig, rng: np.random.Generator) -> Learner:
    return LEARNERS[cfg.algorithm](spec, cfg, rng)
