"""Critics (centralized joint-action, local per-agent, state/history value) and
the TD targets that train them."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .buffer import Batch
from .numerics import (
    MLP, Adam, Network, NumericalError, RecurrentNet, UnsupportedConfiguration, softmax,
)

JOINT_ACTION_CAP = 10_000


def joint_index(actions: np.ndarray, action_counts: Sequence[int]) -> np.ndarray:
    """Row-major joint-action index; agent 0 is the most significant digit."""
    actions = np.asarray(actions)
    idx = np.zeros(actions.shape[:-1], dtype=np.int64)
    for i, n in enumerate(action_counts):
        idx = idx * n + actions[..., i]
    return idx


def joint_components(index: np.ndarray, action_counts: Sequence[int]) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64)
    out = np.empty(index.shape + (len(action_counts),), dtype=np.int64)
    for i in reversed(range(len(action_counts))):
        out[..., i] = index % action_counts[i]
        index = index // action_counts[i]
    return out


class Critic:
    """A live network, its delayed target copy and an Adam optimizer.

    ``recurrent=True`` builds the FC-LSTM-FC shape used for history-conditioned
    value critics; otherwise FC(64)-FC(64)-FC with leaky ReLU.
    """

    def __init__(self, in_dim: int, out_dim: int, lr: float, rng: np.random.Generator,
                 hidden: int = 64, recurrent: bool = False, clip_norm: float | None = 10.0,
                 name: str = "critic"):
        self.recurrent = recurrent
        if recurrent:
            self.net: Network = RecurrentNet(in_dim, hidden, out_dim, rng, name=name)
            self.target: Network = RecurrentNet(in_dim, hidden, out_dim, rng, name=name)
        else:
            self.net = MLP([in_dim, hidden, hidden, out_dim], rng, name=name)
            self.target = MLP([in_dim, hidden, hidden, out_dim], rng, name=name)
        self.target.copy_from(self.net)
        self.optimizer = Adam(self.net.parameters(), lr, clip_norm=clip_norm)

    def sync_targets(self) -> None:
        sync_targets(self.net, self.target)


def sync_targets(live: Network, target: Network) -> None:
    target.copy_from(live)


def nstep_return(rewards: Sequence[float], bootstrap_value: float, gamma: float, n: int, t: int) -> float:
    """``sum_{k<m} gamma^k r_{t+k} + gamma^m * bootstrap`` with ``m = min(n, len - t)``.

    ``rewards`` is a complete (terminated) episode, so the bootstrap term is
    dropped whenever ``t + n`` reaches past its end.
    """
    if n <= 0:
        raise ValueError(f"n must be >= 1, got {n}")
    L = len(rewards)
    if not 0 <= t < L:
        raise ValueError(f"t={t} outside episode of length {L}")
    m = min(n, L - t)
    g = 0.0
    for k in range(m):
        g += gamma ** k * rewards[t + k]
    if t + n < L:
        g += gamma ** m * bootstrap_value
    return g


def nstep_targets(batch: Batch, boot_values: np.ndarray, gamma: float, n: int) -> np.ndarray:
    """n-step returns for every ``(episode, t)``; ``boot_values`` is ``(E, T+1)``
    holding the bootstrap value of each state slot. Padded entries are 0."""
    if n <= 0:
        raise ValueError(f"n must be >= 1, got {n}")
    E, T = batch.rewards.shape
    out = np.zeros((E, T))
    disc = gamma ** np.arange(n)
    for e in range(E):
        L = int(batch.lengths[e])
        r = batch.rewards[e, :L]
        for t in range(L):
            m = min(n, L - t)
            g = float(disc[:m] @ r[t:t + m])
            if t + m < L or not batch.terminal[e]:
                g += gamma ** m * boot_values[e, t + m]
            out[e, t] = g
    return out


def lambda_return(rewards: Sequence[float], values: Sequence[float], gamma: float, lam: float) -> np.ndarray:
    """Forward-view lambda-returns for one terminated episode.

    ``values[t]`` estimates state ``t`` (``len(values) == len(rewards)``); the
    post-terminal value is 0. Computed with the backward recursion
    ``G_t = r_t + gamma * ((1 - lam) * V_{t+1} + lam * G_{t+1})``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != rewards.shape:
        raise ValueError("values and rewards must align")
    L = rewards.size
    out = np.zeros(L)
    g_next, v_next = 0.0, 0.0
    for t in reversed(range(L)):
        g_next = rewards[t] + gamma * ((1.0 - lam) * v_next + lam * g_next)
        out[t] = g_next
        v_next = values[t]
    return out


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (inverse CDF)."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    return np.minimum((u >= cdf).sum(axis=-1), probs.shape[-1] - 1)


def centralized_td_target(batch: Batch, central_target: Network, target_policies: Sequence[np.ndarray],
                          gamma: float, rng: np.random.Generator, n_step: int = 1) -> np.ndarray:
    """Targets ``y = r + gamma * Q_target(x', a')`` with ``a'_i`` drawn from each
    agent's delayed policy at its next history (n-step generalisation when
    ``n_step > 1``). ``target_policies[i]`` is ``(T+1, E, A_i)``.
    """
    if batch.n_episodes == 0:
        raise ValueError("empty buffer")
    E, T1, _ = batch.states.shape
    counts = [p.shape[-1] for p in target_policies]
    sampled = np.stack([_sample_rows(p.transpose(1, 0, 2), rng) for p in target_policies], axis=-1)
    q = central_target.predict(batch.states.reshape(E * T1, -1)).reshape(E, T1, -1)
    boot = np.take_along_axis(q, joint_index(sampled, counts)[..., None], axis=-1)[..., 0]
    return nstep_targets(batch, boot, gamma, n_step)


def joint_action_probs(q_joint: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    return softmax(np.asarray(q_joint, dtype=float) / temperature)


def local_td_target(batch: Batch, agent_index: int, local_target: Network, central: Network,
                    action_counts: Sequence[int], gamma: float, rng: np.random.Generator,
                    n_step: int = 1, temperature: float = 1.0,
                    cap: int = JOINT_ACTION_CAP) -> np.ndarray:
    """Targets ``y = r + gamma * Q^loc_target(x', a'_i)`` where the whole joint
    action ``a'`` is drawn from ``softmax(Q_central(x', .) / temperature)`` and
    agent ``agent_index``'s component is kept."""
    n_joint = math.prod(action_counts)
    if n_joint > cap:
        raise UnsupportedConfiguration(f"{n_joint} joint actions exceeds the enumeration cap of {cap}")
    if batch.n_episodes == 0:
        raise ValueError("empty buffer")
    E, T1, _ = batch.states.shape
    flat = batch.states.reshape(E * T1, -1)
    probs = joint_action_probs(central.predict(flat), temperature)
    joint = _sample_rows(probs, rng)
    a_i = joint_components(joint, action_counts)[:, agent_index]
    q_loc = local_target.predict(flat)
    boot = q_loc[np.arange(E * T1), a_i].reshape(E, T1)
    return nstep_targets(batch, boot, gamma, n_step)


def critic_update(critic: Critic, inputs: np.ndarray, targets: np.ndarray,
                  action_index: np.ndarray | None = None, mask: np.ndarray | None = None) -> float:
    """One optimizer step on the mean squared TD error; returns the pre-step loss.

    Feed-forward critics take ``inputs (N, d)``, ``targets (N,)`` and, for
    action-value heads, ``action_index (N,)``. Recurrent critics take
    time-major ``inputs (T, E, d)``, ``targets (T, E)`` and a ``mask (T, E)``.
    """
    net = critic.net
    targets = np.asarray(targets, dtype=float)
    out = net.forward(inputs)
    if action_index is None:
        pred = out[..., 0]
    else:
        pred = np.take_along_axis(out, np.asarray(action_index)[..., None], axis=-1)[..., 0]
    w = np.ones_like(pred) if mask is None else np.asarray(mask, dtype=float)
    count = max(w.sum(), 1.0)
    err = (pred - targets) * w
    loss = float((err ** 2).sum() / count)
    if not math.isfinite(loss):
        net.backward(np.zeros_like(out))
        raise NumericalError(f"non-finite critic loss ({loss}); max |target| {np.nanmax(np.abs(targets))}")
    dpred = 2.0 * err / count
    dout = np.zeros_like(out)
    if action_index is None:
        dout[..., 0] = dpred
    else:
        np.put_along_axis(dout, np.asarray(action_index)[..., None], dpred[..., None], axis=-1)
    net.backward(dout)
    critic.optimizer.step()
    return loss
