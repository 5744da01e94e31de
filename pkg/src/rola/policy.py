"""Decentralized recurrent actors: epsilon-soft acting and the policy-gradient update."""
from __future__ import annotations

import math

import numpy as np

from .numerics import Adam, HiddenState, NumericalError, RecurrentNet, log_softmax


class Actor:
    """FC-LSTM-FC policy over ``[observation, one-hot previous own action]``,
    with a delayed target copy."""

    def __init__(self, obs_dim: int, n_actions: int, lr: float, rng: np.random.Generator,
                 hidden: int = 64, clip_norm: float | None = 10.0, name: str = "actor"):
        self.obs_dim, self.n_actions = obs_dim, n_actions
        self.net = RecurrentNet(obs_dim + n_actions, hidden, n_actions, rng, name=name)
        self.target = RecurrentNet(obs_dim + n_actions, hidden, n_actions, rng, name=name)
        self.target.copy_from(self.net)
        self.optimizer = Adam(self.net.parameters(), lr, clip_norm=clip_norm)

    def input(self, obs: np.ndarray, prev_action: int | None) -> np.ndarray:
        x = np.zeros((1, self.obs_dim + self.n_actions))
        x[0, :self.obs_dim] = obs
        if prev_action is not None:
            x[0, self.obs_dim + prev_action] = 1.0
        return x

    def policy(self, inputs: np.ndarray, target: bool = False) -> np.ndarray:
        """Action probabilities for a time-major input sequence ``(T, E, d)``."""
        net = self.target if target else self.net
        return np.exp(log_softmax(net.predict(inputs)))

    def sync_targets(self) -> None:
        self.target.copy_from(self.net)


def epsilon_schedule(episode: int, eps_start: float, eps_end: float, decay_episodes: int) -> float:
    """Linear decay from ``eps_start`` at episode 0 to ``eps_end`` at ``decay_episodes``."""
    if decay_episodes < 1:
        raise ValueError("decay_episodes must be >= 1")
    frac = min(max(episode, 0) / decay_episodes, 1.0)
    return eps_start + frac * (eps_end - eps_start)


def act(net: RecurrentNet, x: np.ndarray, hidden: HiddenState, epsilon: float,
        rng: np.random.Generator) -> tuple[int, HiddenState, float]:
    """Epsilon-soft sample: uniform action with probability ``epsilon``, else a
    draw from the softmax. Returns ``(action, new_hidden, log pi(action))``
    where ``pi`` is the un-mixed policy."""
    logits, hidden = net.step(x, hidden)
    logp = log_softmax(logits[0])
    n = logp.size
    if rng.random() < epsilon:
        a = int(rng.integers(n))
    else:
        cdf = np.cumsum(np.exp(logp))
        a = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), n - 1)
    return a, hidden, float(logp[a])


def policy_gradient_step(actor: Actor, inputs: np.ndarray, actions: np.ndarray, advantages: np.ndarray,
                         mask: np.ndarray | None = None, entropy_weight: float = 0.0) -> float:
    """One ascent step on ``sum_t log pi(a_t | tau_t) * A_t`` averaged over episodes.

    ``inputs`` is time-major ``(T, E, d)``; ``actions``, ``advantages`` and
    ``mask`` are ``(T, E)``. Advantages are treated as constants. Returns the
    pre-step surrogate loss ``-sum log pi * A - entropy_weight * H`` per episode.
    """
    advantages = np.asarray(advantages, dtype=float)
    if not np.all(np.isfinite(advantages)):
        raise NumericalError("non-finite advantages passed to the policy gradient")
    T, E = actions.shape
    w = np.ones((T, E)) if mask is None else np.asarray(mask, dtype=float)
    logits = actor.net.forward(inputs)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    taken = np.take_along_axis(logp, actions[..., None], axis=-1)[..., 0]
    entropy = -(probs * logp).sum(axis=-1)
    loss = float(-(w * taken * advantages).sum() / E - entropy_weight * (w * entropy).sum() / E)
    if not math.isfinite(loss):
        actor.net.backward(np.zeros_like(logits))
        raise NumericalError(f"non-finite actor loss ({loss})")
    onehot = np.zeros_like(logits)
    np.put_along_axis(onehot, actions[..., None], 1.0, axis=-1)
    dlogits = -(w * advantages)[..., None] * (onehot - probs) / E
    if entropy_weight:
        dlogits += entropy_weight * w[..., None] * probs * (logp + entropy[..., None]) / E
    actor.net.backward(dlogits)
    actor.optimizer.step()
    return loss
