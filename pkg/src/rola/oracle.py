"""Brute-force ground truth for tests and the ``oracle`` CLI command.

Nothing here calls into the estimator or critic code it is meant to check:
every quantity is recomputed with plain loops over enumerated actions,
states or trajectories.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import UnsupportedConfiguration

EXACT_ENTRY_CAP = 200_000


@dataclass
class ExactEvaluation:
    """Finite-horizon evaluation of a fixed joint policy.

    ``q[t][k]`` maps joint action tuples to ``Q_t(states[k], a)``; ``v[t, k]``
    is ``V_t(states[k])``; ``v[horizon]`` is zero.
    """

    states: list
    joint_actions: list[tuple[int, ...]]
    q: np.ndarray          # (horizon, n_states, n_joint)
    v: np.ndarray          # (horizon + 1, n_states)
    gamma: float
    horizon: int
    expected_reward: np.ndarray   # (n_states, n_joint)
    _model: Callable
    _probs: np.ndarray            # (n_states, n_joint) joint-policy probabilities

    def max_bellman_residual(self) -> float:
        """Re-substitute every entry into its recursion and report the worst gap."""
        index = {s: k for k, s in enumerate(self.states)}
        worst = 0.0
        for t in range(self.horizon):
            for k, s in enumerate(self.states):
                for j, a in enumerate(self.joint_actions):
                    rhs = 0.0
                    for p, s2, r, term in self._model(s, a):
                        rhs += p * r
                        if not term and t + 1 < self.horizon:
                            rhs += p * self.gamma * self.v[t + 1, index[s2]]
                    worst = max(worst, abs(self.q[t, k, j] - rhs))
                v = float(np.dot(self._probs[k], self.q[t, k]))
                worst = max(worst, abs(self.v[t, k] - v))
        return worst


def _policy_table(joint_policy, states, action_counts) -> np.ndarray:
    joint = list(itertools.product(*[range(n) for n in action_counts]))
    table = np.zeros((len(states), len(joint)))
    for k, s in enumerate(states):
        per_agent = joint_policy(s) if callable(joint_policy) else joint_policy
        for j, a in enumerate(joint):
            p = 1.0
            for i, ai in enumerate(a):
                p *= float(per_agent[i][ai])
            table[k, j] = p
    return table


def exact_joint_q(env, joint_policy, gamma: float, horizon: int) -> ExactEvaluation:
    """Backward induction ``Q_t(s, a) = E[r] + gamma * sum_s' P(s'|s, a) V_{t+1}(s')``.

    ``env`` must expose ``enumerate_states()`` and
    ``transition_distribution(state, joint_action)``; ``joint_policy`` is either
    a list of per-agent distributions or a callable ``state -> that list``.
    """
    states = env.enumerate_states()
    counts = env.spec.action_counts
    joint = list(itertools.product(*[range(n) for n in counts]))
    entries = horizon * len(states) * len(joint)
    if entries > EXACT_ENTRY_CAP:
        raise UnsupportedConfiguration(
            f"{entries} state-action-step entries exceeds the exact-evaluation cap of {EXACT_ENTRY_CAP}")
    index = {s: k for k, s in enumerate(states)}
    model = env.transition_distribution
    probs = _policy_table(joint_policy, states, counts)

    # one pass over the model: expected rewards and sparse successor lists
    exp_r = np.zeros((len(states), len(joint)))
    succ: list[list[list[tuple[float, int]]]] = []
    for k, s in enumerate(states):
        row = []
        for j, a in enumerate(joint):
            nxt = []
            for p, s2, r, term in model(s, a):
                exp_r[k, j] += p * r
                if not term:
                    nxt.append((p, index[s2]))
            row.append(nxt)
        succ.append(row)

    q = np.zeros((horizon, len(states), len(joint)))
    v = np.zeros((horizon + 1, len(states)))
    for t in reversed(range(horizon)):
        for k in range(len(states)):
            for j in range(len(joint)):
                cont = 0.0
                for p, k2 in succ[k][j]:
                    cont += p * v[t + 1, k2]
                q[t, k, j] = exp_r[k, j] + gamma * cont
            v[t, k] = float(np.dot(probs[k], q[t, k]))
    return ExactEvaluation(states, joint, q, v, gamma, horizon, exp_r, model, probs)


def enumerate_trajectory_q(env_factory: Callable, state, first_action: Sequence[int],
                           joint_policy: Sequence[Sequence[float]], gamma: float, horizon: int) -> float:
    """Q by expanding the full tree of joint-action sequences on a noise-free env.

    ``env_factory()`` must build a fresh deterministic env whose ``state``
    attribute can be assigned; transitions run through its ordinary ``step``.
    """
    counts = [len(p) for p in joint_policy]
    joint = list(itertools.product(*[range(n) for n in counts]))
    weights = [float(np.prod([joint_policy[i][a[i]] for i in range(len(a))])) for a in joint]
    rng = np.random.default_rng(0)

    def expand(s, action, depth) -> float:
        env = env_factory()
        env.state = s
        res = env.step(list(action), rng)
        value = res.reward
        if res.terminal or depth + 1 >= horizon:
            return value
        nxt = env.state
        cont = 0.0
        for w, a in zip(weights, joint):
            if w:
                cont += w * expand(nxt, a, depth + 1)
        return value + gamma * cont

    return expand(state, tuple(first_action), 0)


def exact_coma(q_table: np.ndarray, joint_action: Sequence[int], agent_index: int,
               policy_i: Sequence[float]) -> float:
    """COMA advantage by an explicit loop over agent ``agent_index``'s alternatives.
    ``q_table`` is indexed ``q_table[a_1, ..., a_n]``."""
    q_table = np.asarray(q_table, dtype=float)
    a = list(joint_action)
    baseline = 0.0
    for alt in range(q_table.shape[agent_index]):
        cf = list(a)
        cf[agent_index] = alt
        baseline += policy_i[alt] * q_table[tuple(cf)]
    return float(q_table[tuple(a)] - baseline)


def exact_eca(q_table: np.ndarray, policies: Sequence[Sequence[float]], agent_index: int) -> np.ndarray:
    """Nested-loop ``sum_{a_-i} prod_j pi_j(a_j) * (Q(a_i, a_-i) - sum_b pi_i(b) Q(b, a_-i))``."""
    q_table = np.asarray(q_table, dtype=float)
    counts = q_table.shape
    others = [j for j in range(len(counts)) if j != agent_index]
    out = np.zeros(counts[agent_index])
    for ai in range(counts[agent_index]):
        total = 0.0
        for rest in itertools.product(*[range(counts[j]) for j in others]):
            w = 1.0
            a = [0] * len(counts)
            a[agent_index] = ai
            for j, aj in zip(others, rest):
                w *= policies[j][aj]
                a[j] = aj
            baseline = 0.0
            for b in range(counts[agent_index]):
                cf = list(a)
                cf[agent_index] = b
                baseline += policies[agent_index][b] * q_table[tuple(cf)]
            total += w * (q_table[tuple(a)] - baseline)
        out[ai] = total
    return out


def local_critic_fixed_point(payoff: np.ndarray, behavior_policies: Sequence[Sequence[float]],
                             agent_index: int) -> np.ndarray:
    """``E_{a_-i ~ behavior}[R(a_i, a_-i)]`` for each ``a_i`` of a one-step game."""
    payoff = np.asarray(payoff, dtype=float)
    counts = payoff.shape
    out = np.zeros(counts[agent_index])
    for a in itertools.product(*[range(n) for n in counts]):
        w = 1.0
        for j, aj in enumerate(a):
            if j != agent_index:
                w *= behavior_policies[j][aj]
        out[a[agent_index]] += w * payoff[a]
    return out


def brute_nstep_return(rewards: Sequence[float], values: Sequence[float], gamma: float, n: int, t: int) -> float:
    """Direct summation; ``values[k]`` is the bootstrap value of state ``k`` and
    every state at or after ``len(rewards)`` is terminal."""
    total = 0.0
    discount = 1.0
    k = t
    while k < len(rewards) and k < t + n:
        total += discount * rewards[k]
        discount *= gamma
        k += 1
    if k < len(rewards):
        total += discount * values[k]
    return total


def brute_lambda_return(rewards: Sequence[float], values: Sequence[float], gamma: float, lam: float, t: int) -> float:
    """Explicit ``(1 - lam) * sum_m lam^(m-1) G^(m) + lam^(L-t-1) G^(L-t)`` expansion."""
    L = len(rewards)
    horizon = L - t
    total = 0.0
    for m in range(1, horizon):
        total += (1 - lam) * lam ** (m - 1) * brute_nstep_return(rewards, values, gamma, m, t)
    total += lam ** (horizon - 1) * brute_nstep_return(rewards, values, gamma, horizon, t)
    return total


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    return float(sum(gamma ** k * r for k, r in enumerate(rewards)))


INSTANCES = {
    "matrix-identity": "2x2 identity payoff, uniform policies",
    "matrix-3-0-0-1": "payoff [[3,0],[0,1]], uniform policies",
    "capture-3x3": "3x3 noise-free capture target, horizon 4, uniform policies",
    "boxpush-6x6": "box pushing 6x6 optimal discounted return at gamma 0.99",
    "boxpush-10x10": "box pushing 10x10 optimal discounted return at gamma 0.99",
}


def describe_instance(name: str) -> dict:
    """Exact values for one of the small named instances in :data:`INSTANCES`."""
    from .envs import CaptureTarget, MatrixGame, box_pushing_optimal_return

    if name in ("matrix-identity", "matrix-3-0-0-1"):
        payoff = np.eye(2) if name == "matrix-identity" else np.array([[3.0, 0.0], [0.0, 1.0]])
        uniform = [[0.5, 0.5], [0.5, 0.5]]
        ev = exact_joint_q(MatrixGame(payoff), uniform, 0.99, 1)
        return {
            "instance": name,
            "payoff": payoff.tolist(),
            "Q": ev.q[0, 0].reshape(2, 2).tolist(),
            "V": float(ev.v[0, 0]),
            "eca": [exact_eca(payoff, uniform, i).tolist() for i in range(2)],
            "local_critic_fixed_point": [local_critic_fixed_point(payoff, uniform, i).tolist() for i in range(2)],
        }
    if name == "capture-3x3":
        env = CaptureTarget(3, noise=0.0)
        uniform = [[0.2] * 5, [0.2] * 5]
        ev = exact_joint_q(env, uniform, 0.99, 4)
        return {
            "instance": name,
            "n_states": len(ev.states),
            "mean_V0": float(ev.v[0].mean()),
            "max_V0": float(ev.v[0].max()),
            "bellman_residual": ev.max_bellman_residual(),
        }
    if name in ("boxpush-6x6", "boxpush-10x10"):
        n = 6 if name == "boxpush-6x6" else 10
        return {"instance": name, "gamma": 0.99, "optimal_return": box_pushing_optimal_return(n, 0.99)}
    raise KeyError(f"unknown instance {name!r}; choose from {', '.join(INSTANCES)}")
