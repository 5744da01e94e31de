"""Small builders shared by the test modules."""
import numpy as np

from rola.buffer import Batch, EpisodeBuffer, Transition
from rola.numerics import gradient_check


def one_episode_batch(rewards, states=None, actions=None, n_agents=2, terminal=True, state_dim=3):
    """A single-episode batch with arbitrary (or random) states and actions."""
    T = len(rewards)
    rng = np.random.default_rng(0)
    states = rng.normal(size=(T + 1, state_dim)) if states is None else np.asarray(states, dtype=float)
    actions = np.zeros((T, n_agents), dtype=np.int64) if actions is None else np.asarray(actions)
    obs = [np.ones((1, T + 1, 1)) for _ in range(n_agents)]
    return Batch(states[None], obs, actions[None], np.asarray(rewards, dtype=float)[None],
                 np.ones((1, T), dtype=bool), np.array([T]), np.array([terminal]))


def random_buffer(rng, episodes=3, max_len=5, state_dim=3, obs_dim=2, counts=(2, 2)):
    """Buffer of random variable-length terminated episodes."""
    buf = EpisodeBuffer()
    for _ in range(episodes):
        L = int(rng.integers(1, max_len + 1))
        s = rng.normal(size=state_dim)
        obs = [rng.normal(size=obs_dim) for _ in counts]
        for t in range(L):
            s2 = rng.normal(size=state_dim)
            obs2 = [rng.normal(size=obs_dim) for _ in counts]
            ja = tuple(int(rng.integers(n)) for n in counts)
            buf.add(Transition(s, obs, ja, float(rng.normal()), obs2, s2, t == L - 1))
            s, obs = s2, obs2
    return buf


# central differences at step 1e-5 on an O(1) float64 loss carry ~5e-11 of
# rounding noise, so entries below this size cannot reach 1e-4 relative error
ROUNDOFF_FLOOR = 1e-6


def assert_gradients_match(params, loss_fn, tolerance=1e-4):
    """gradient_check, with entries under the rounding floor re-verified by a
    Richardson-extrapolated difference at larger steps."""
    rep = gradient_check(params, loss_fn, tolerance)
    by_name = {p.name: p for p in params}
    for name, idx, analytic, _, rel in rep.failures:
        assert abs(analytic) < ROUNDOFF_FLOOR, f"{name}{idx}: rel error {rel} on a non-negligible gradient"
        p = by_name[name]
        orig = p.value[idx]

        def diff(h):
            p.value[idx] = orig + h
            up = loss_fn()
            p.value[idx] = orig - h
            down = loss_fn()
            p.value[idx] = orig
            return (up - down) / (2 * h)

        rich = (4 * diff(5e-4) - diff(1e-3)) / 3
        assert abs(analytic - rich) / max(1e-8, abs(analytic) + abs(rich)) < tolerance, (name, idx, analytic, rich)
    return rep
