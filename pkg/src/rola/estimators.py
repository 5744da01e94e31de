"""Advantage estimators that weight the log-policy gradient.

All functions are vectorised over leading batch axes and treat critic outputs
as constants.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .buffer import Batch
from .critics import JOINT_ACTION_CAP, Critic, nstep_targets
from .numerics import UnsupportedConfiguration

ALGORITHMS = ("rola", "ia2c", "central_v", "coma", "eca")


def rola_advantage(q_local: np.ndarray, policy: np.ndarray) -> np.ndarray:
    """Local advantage ``Q^loc(x, a) - sum_b pi(b) Q^loc(x, b)`` for every action ``a``."""
    q_local = np.asarray(q_local, dtype=float)
    policy = np.asarray(policy, dtype=float)
    if q_local.shape != policy.shape:
        raise ValueError(f"critic/policy length mismatch: {q_local.shape} vs {policy.shape}")
    return q_local - (policy * q_local).sum(axis=-1, keepdims=True)


def _joint_tensor(q_joint: np.ndarray, action_counts: Sequence[int]) -> np.ndarray:
    """``(..., prod(counts))`` -> ``(..., A_1, ..., A_n)``."""
    q_joint = np.asarray(q_joint, dtype=float)
    if q_joint.ndim == 0 or q_joint.shape[-1] != math.prod(action_counts):
        raise ValueError(f"Q of shape {q_joint.shape} does not enumerate joint actions {tuple(action_counts)}")
    return q_joint.reshape(q_joint.shape[:-1] + tuple(action_counts))


def coma_advantage(q_joint: np.ndarray, joint_action: np.ndarray, agent_index: int,
                   policy_i: np.ndarray, action_counts: Sequence[int]) -> np.ndarray:
    """Counterfactual advantage: ``Q(s, a) - sum_b pi_i(b) Q(s, b, a_-i)``.

    ``q_joint`` is ``(..., prod(action_counts))`` in row-major joint order,
    ``joint_action`` is ``(..., n_agents)`` and ``policy_i`` is ``(..., A_i)``.
    """
    counts = tuple(action_counts)
    q = _joint_tensor(q_joint, counts)
    joint_action = np.asarray(joint_action, dtype=np.int64)
    batch_shape = q.shape[:-len(counts)]
    if joint_action.shape != batch_shape + (len(counts),):
        raise ValueError(f"joint action shape {joint_action.shape} does not fit Q batch {batch_shape}")
    for i, n in enumerate(counts):
        if np.any((joint_action[..., i] < 0) | (joint_action[..., i] >= n)):
            raise ValueError(f"invalid action for agent {i}")
    qf = q.reshape((-1,) + counts)
    ja = joint_action.reshape(-1, len(counts))
    rows = np.arange(qf.shape[0])
    # counterfactual row: agent i's action free, teammates pinned at their taken actions
    index: list = [rows]
    for j in range(len(counts)):
        index.append(slice(None) if j == agent_index else ja[:, j])
    cf = qf[tuple(index)]
    taken = cf[rows, ja[:, agent_index]]
    baseline = (np.asarray(policy_i, dtype=float).reshape(cf.shape) * cf).sum(axis=-1)
    return (taken - baseline).reshape(batch_shape)


def eca_advantage(q_joint: np.ndarray, agent_index: int, policies: Sequence[np.ndarray],
                  action_counts: Sequence[int], cap: int = JOINT_ACTION_CAP) -> np.ndarray:
    """Expected counterfactual advantage for every action of ``agent_index``:
    the COMA advantage marginalised exactly over teammates' current policies.

    Equivalent to ``Qbar(a_i) - sum_b pi_i(b) Qbar(b)`` with
    ``Qbar(a_i) = E_{a_-i ~ pi_-i} Q(a_i, a_-i)``.
    """
    counts = tuple(action_counts)
    if math.prod(counts) > cap:
        raise UnsupportedConfiguration(f"{math.prod(counts)} joint actions exceeds the enumeration cap of {cap}")
    q = _joint_tensor(q_joint, counts)
    n = len(counts)
    nb = q.ndim - n
    # contract teammates' axes from the last to the first
    qbar = q
    for j in reversed(range(n)):
        if j == agent_index:
            continue
        pj = np.asarray(policies[j], dtype=float)
        axis = nb + j
        shape = [1] * qbar.ndim
        shape[:nb] = pj.shape[:-1]
        shape[axis] = counts[j]
        qbar = (qbar * pj.reshape(shape)).sum(axis=axis)
    pi = np.asarray(policies[agent_index], dtype=float)
    return qbar - (pi * qbar).sum(axis=-1, keepdims=True)


def central_v_advantage(value_critic: Critic, batch: Batch, gamma: float, n: int) -> np.ndarray:
    """``G^(n)_t - V(x_t)`` per ``(episode, t)``; the n-step return bootstraps
    from the target value network."""
    E, T1, _ = batch.states.shape
    flat = batch.states.reshape(E * T1, -1)
    boot = value_critic.target.predict(flat)[:, 0].reshape(E, T1)
    v = value_critic.net.predict(flat)[:, 0].reshape(E, T1)
    return (nstep_targets(batch, boot, gamma, n) - v[:, :-1]) * batch.mask


def ia2c_advantage(value_critic: Critic, histories: np.ndarray, batch: Batch, gamma: float, n: int) -> np.ndarray:
    """As :func:`central_v_advantage` but ``V`` is a recurrent critic over the
    agent's own history; ``histories`` is time-major ``(T+1, E, d)``."""
    boot = value_critic.target.predict(histories)[..., 0].T
    v = value_critic.net.predict(histories)[..., 0].T
    return (nstep_targets(batch, boot, gamma, n) - v[:, :-1]) * batch.mask
