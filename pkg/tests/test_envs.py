import io
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rola.envs import (
    BoxPushing, CaptureTarget, EnvSpec, MatrixGame, box_pushing_optimal_return, dump_trajectory, make_env,
    record_trace,
)
from rola.envs.box_pushing import BOUNDARY, BOX, FORWARD, NORTH, STAY, TURN_LEFT, BoxPushingState
from rola.envs.capture_target import DOWN, LEFT, RIGHT, STAY as CT_STAY, UP, CaptureTargetState

GOLDEN = Path(__file__).parent / "data" / "boxpush_6x6_golden.jsonl"


def golden_trace_bytes() -> bytes:
    """Box Pushing 6x6, three episodes of seeded uniform-random joint actions."""
    env = BoxPushing(6)
    records = record_trace(env, lambda ep, t, rng: rng.integers(4, size=2), episodes=3, seed=2024)
    buf = io.StringIO()
    dump_trajectory(records, buf)
    return buf.getvalue().encode()


def test_golden_trace_byte_identical():
    first, second = golden_trace_bytes(), golden_trace_bytes()
    assert first == second
    assert first == GOLDEN.read_bytes()


# capture target

def test_capture_reset_seeded_and_distinct():
    env = CaptureTarget(6)
    a = env.reset(np.random.default_rng(11)).state
    b = env.reset(np.random.default_rng(11)).state
    np.testing.assert_array_equal(a, b)
    s = env.state
    cells = {s.agent_positions[0], s.agent_positions[1], s.target_position}
    assert len(cells) == 3


def test_capture_reset_uniform_cells():
    env = CaptureTarget(6)
    rng = np.random.default_rng(12)
    counts = np.zeros(36)
    n = 10_000
    for _ in range(n):
        env.reset(rng)
        r, c = env.state.agent_positions[0]
        counts[r * 6 + c] += 1
    p = 1 / 36
    assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)) + 1)


def test_capture_wraps_up():
    env = CaptureTarget(6, noise=0.0)
    env.state = CaptureTargetState(((0, 3), (2, 2)), (4, 4))
    env.step([UP, CT_STAY], np.random.default_rng(0))
    assert env.state.agent_positions[0] == (5, 3)


@pytest.mark.parametrize("action", [UP, DOWN, LEFT, RIGHT])
def test_capture_toroidal_closure(action):
    env = CaptureTarget(4, noise=0.0)
    start = (1, 2)
    env.state = CaptureTargetState((start, (3, 3)), (0, 0))
    rng = np.random.default_rng(0)
    for _ in range(4):
        env.step([action, CT_STAY], rng)
    assert env.state.agent_positions[0] == start


def test_capture_reward_and_terminal():
    env = CaptureTarget(6, noise=0.0)
    # target at (2, 2) moves east to (2, 3); agents step onto it
    env.state = CaptureTargetState(((1, 3), (2, 4)), (2, 2))
    res = env.step([DOWN, LEFT], np.random.default_rng(0))
    assert res.reward == 1.0 and res.terminal and res.info["captured"]


def test_capture_horizon():
    env = CaptureTarget(6)
    rng = np.random.default_rng(3)
    for _ in range(5):
        res = env.reset(rng)
        steps = 0
        while not res.terminal:
            res = env.step([CT_STAY, CT_STAY], rng)
            steps += 1
            assert len(res.observations[0]) == 5 and len(res.observations[1]) == 5
        assert steps <= 60


def test_capture_rejects_invalid_action():
    env = CaptureTarget(6)
    env.reset(np.random.default_rng(0))
    with pytest.raises(ValueError):
        env.step([5, 0], np.random.default_rng(0))


def test_capture_transition_distribution_sums_to_one():
    env = CaptureTarget(3)
    s = env.enumerate_states()[17]
    dist = env.transition_distribution(s, [RIGHT, UP])
    assert abs(sum(p for p, *_ in dist) - 1.0) < 1e-12


# box pushing

def test_boxpush_reset_deterministic():
    env = BoxPushing(6)
    a = env.reset(np.random.default_rng(0)).state
    b = env.reset(np.random.default_rng(99)).state
    np.testing.assert_array_equal(a, b)


def test_boxpush_push_moves_box_north():
    env = BoxPushing(6)
    env.reset()
    (r, c, h), box = env.state.agents[0], env.state.boxes[0]
    assert h == NORTH and box == (r - 1, c)
    env.step([FORWARD, STAY])
    assert env.state.boxes[0] == (box[0] - 1, box[1])
    assert env.state.agents[0][:2] == box


def test_boxpush_goal_reward():
    env = BoxPushing(6)
    env.reset()
    rewards = []
    res = None
    for _ in range(3):
        res = env.step([FORWARD, STAY])
        rewards.append(res.reward)
    assert rewards == [0.0, 0.0, 100.0] and res.terminal


def test_boxpush_boundary_blocks():
    env = BoxPushing(6)
    env.state = BoxPushingState(((5, 0, 2), (5, 5, NORTH)), ((3, 2), (3, 4)))   # agent 0 faces south at the edge
    res = env.step([FORWARD, STAY])
    assert env.state.agents[0] == (5, 0, 2)
    assert res.observations[0][BOUNDARY] == 1.0 and res.observations[0].sum() == 1.0


def test_boxpush_sideways_push_blocked():
    env = BoxPushing(6)
    env.state = BoxPushingState(((3, 1, 1), (5, 5, NORTH)), ((3, 2), (3, 4)))   # agent 0 faces east into a box
    res = env.step([FORWARD, STAY])
    assert env.state.boxes == ((3, 2), (3, 4)) and env.state.agents[0] == (3, 1, 1)
    assert res.observations[0][BOX] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=120))
def test_boxpush_conservation(actions):
    env = BoxPushing(6)
    env.reset()
    for ja in actions:
        before = env.state.boxes
        res = env.step(list(ja))
        after = env.state.boxes
        assert len(after) == 2
        for (r0, c0), (r1, c1) in zip(before, after):
            assert c0 == c1 and r1 in (r0, r0 - 1)
        if res.reward:
            assert res.reward == 100.0 and res.terminal
        assert all(o.shape == (4,) for o in res.observations)
        if res.terminal:
            break
    assert env.state.step_count <= 100


def test_boxpush_optimal_return():
    assert box_pushing_optimal_return(6, 1.0) == 100.0
    assert box_pushing_optimal_return(10, 1.0) == 100.0
    assert box_pushing_optimal_return(6, 0.99) == pytest.approx(100 * 0.99 ** 2, abs=1e-12)
    assert box_pushing_optimal_return(10, 0.99) < box_pushing_optimal_return(6, 0.99)
    with pytest.raises(ValueError):
        box_pushing_optimal_return(6, 0.0)


def test_boxpush_optimal_return_matches_scripted_play():
    # pushing straight north realises the BFS optimum on 6x6
    env = BoxPushing(6)
    env.reset()
    g, disc = 0.0, 1.0
    while True:
        res = env.step([FORWARD, STAY])
        g += disc * res.reward
        disc *= 0.99
        if res.terminal:
            break
    assert g == pytest.approx(box_pushing_optimal_return(6, 0.99), abs=1e-12)


# matrix game and factory

def test_matrix_game():
    env = MatrixGame([[1, 0], [0, 1]])
    env.reset()
    res = env.step([0, 0])
    assert res.reward == 1.0 and res.terminal
    env = MatrixGame([[3, 0], [0, 1]])
    env.reset()
    assert env.step([1, 0]).reward == 0.0
    assert env.spec.max_steps == 1
    with pytest.raises(ValueError):
        MatrixGame([])


def test_make_env_and_spec_validation():
    assert make_env("box_pushing", 10).spec.state_dim == 17
    assert make_env("capture_target", 8).spec.n_joint_actions == 25
    with pytest.raises(ValueError):
        make_env("nope")
    with pytest.raises(ValueError):
        EnvSpec("x", 2, (2,), (1, 1), 1, 1)


def test_turning_changes_only_heading():
    env = BoxPushing(6)
    env.reset()
    before = env.state
    env.step([TURN_LEFT, STAY])
    assert env.state.agents[0][:2] == before.agents[0][:2]
    assert env.state.agents[0][2] == (NORTH - 1) % 4
