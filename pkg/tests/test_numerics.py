import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rola.numerics import (
    Adam, AdamState, BackwardStateError, Dense, HiddenState, LSTMCell, MLP, NumericalError, Parameter, RecurrentNet,
    ShapeError, UnsupportedConfiguration, adam_step, clip_grad_norm, gradient_check, load_checkpoint,
    log_softmax, save_checkpoint, sigmoid, softmax,
)


def test_init_ranges_and_biases():
    rng = np.random.default_rng(0)
    layer = Dense(16, 8, rng=rng)
    assert np.all(np.abs(layer.W.value) <= 1 / np.sqrt(16))
    assert np.all(layer.b.value == 0)
    cell = LSTMCell(8, 4, rng)
    assert np.all(cell.b.value[4:8] == 1.0)
    assert np.all(cell.b.value[:4] == 0) and np.all(cell.b.value[8:] == 0)


def test_dense_shape_error_names_both_shapes():
    layer = Dense(3, 2)
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        layer.forward(np.zeros((4, 5)))


def test_backward_without_forward():
    with pytest.raises(BackwardStateError):
        Dense(2, 2).backward(np.zeros((1, 2)))
    net = RecurrentNet(3, 4, 2)
    with pytest.raises(BackwardStateError):
        net.backward(np.zeros((2, 1, 2)))


def test_backward_clears_cache():
    layer = Dense(2, 2)
    layer.forward(np.ones((1, 2)))
    layer.backward(np.ones((1, 2)))
    with pytest.raises(BackwardStateError):
        layer.backward(np.ones((1, 2)))


def test_sigmoid_and_softmax_stable():
    z = np.array([-1000.0, 0.0, 1000.0])
    assert np.allclose(sigmoid(z), [0.0, 0.5, 1.0])
    p = softmax(np.array([[1000.0, 1000.0, -1000.0]]))
    assert np.allclose(p, [[0.5, 0.5, 0.0]])
    assert np.all(np.isfinite(log_softmax(np.array([1e4, -1e4]))))


def test_recurrent_step_matches_predict():
    net = RecurrentNet(5, 6, 3, np.random.default_rng(1))
    xs = np.random.default_rng(2).normal(size=(4, 2, 5))
    seq = net.predict(xs)
    state = net.initial_state(2)
    for t in range(4):
        out, state = net.step(xs[t], state)
        np.testing.assert_allclose(out, seq[t], atol=1e-14)
    np.testing.assert_allclose(net.forward(xs), seq, atol=1e-14)


def _sq_loss(net, x, target):
    def loss():
        y = net.forward(x)
        net.backward(y - target)
        return 0.5 * float(((y - target) ** 2).sum())
    return loss


def test_gradient_check_mlp_and_lstm():
    rng = np.random.default_rng(3)
    mlp = MLP([4, 6, 6, 3], rng)
    rep = gradient_check(mlp.parameters(), _sq_loss(mlp, rng.normal(size=(5, 4)), rng.normal(size=(5, 3))))
    assert rep.ok, rep.failures[:3]
    rnn = RecurrentNet(3, 5, 2, rng)
    rep = gradient_check(rnn.parameters(), _sq_loss(rnn, rng.normal(size=(4, 2, 3)), rng.normal(size=(4, 2, 2))))
    assert rep.ok and rep.max_rel_error < 1e-4


def test_gradient_check_detects_wrong_gradient():
    p = Parameter("w", np.array([1.0, 2.0]))

    def bad():
        p.grad += 3 * p.value      # true gradient is 2 * value
        return float((p.value ** 2).sum())

    rep = gradient_check([p], bad)
    assert not rep.ok and len(rep.failures) == 2


def test_gradient_check_edge_cases():
    assert gradient_check([], lambda: 0.0).n_checked == 0
    big = Parameter("big", np.zeros(6000))
    with pytest.raises(UnsupportedConfiguration):
        gradient_check([big], lambda: 0.0)


def test_adam_first_step_moves_by_lr():
    # first bias-corrected step has magnitude lr (up to eps) in every coordinate
    p = Parameter("w", np.array([1.0, -2.0, 3.0]))
    p.grad[...] = [0.5, -4.0, 1e-3]
    state = AdamState(learning_rate=0.1)
    adam_step(state, [p])
    np.testing.assert_allclose(p.value, [0.9, -1.9, 2.9], atol=1e-6)
    assert state.step_count == 1
    assert np.all(p.grad == 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.integers(0, 20))
def test_adam_zero_gradient_is_noop(values, warmup):
    p = Parameter("w", np.array(values))
    state = AdamState(learning_rate=0.01)
    rng = np.random.default_rng(warmup)
    for _ in range(warmup):
        p.grad[...] = rng.normal(size=p.shape)
        adam_step(state, [p])
    before = p.value.copy()
    adam_step(state, [p])
    np.testing.assert_array_equal(p.value, before)


def test_adam_rejects_nan():
    p = Parameter("blockA", np.zeros(2))
    p.grad[0] = np.nan
    with pytest.raises(NumericalError, match="blockA"):
        Adam([p], 0.1).step()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8), st.floats(0.1, 20))
def test_clip_grad_norm_bound(grads, max_norm):
    p = Parameter("w", np.zeros(len(grads)))
    p.grad[...] = grads
    before = clip_grad_norm([p], max_norm)
    after = float(np.linalg.norm(p.grad))
    assert after <= max_norm * (1 + 1e-9)
    if before <= max_norm:
        np.testing.assert_array_equal(p.grad, grads)


def test_checkpoint_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(4)
    nets = {"a": RecurrentNet(3, 4, 2, rng, name="a"), "b": MLP([2, 3, 1], rng, name="b")}
    save_checkpoint(tmp_path / "c.npz", nets, {"note": "x"})
    loaded, meta = load_checkpoint(tmp_path / "c.npz")
    assert meta["note"] == "x"
    fresh = {"a": RecurrentNet(3, 4, 2, np.random.default_rng(9), name="a"),
             "b": MLP([2, 3, 1], np.random.default_rng(9), name="b")}
    for k, net in fresh.items():
        net.load_state_dict(loaded[k])
        for p, q in zip(net.parameters(), nets[k].parameters()):
            assert p.value.tobytes() == q.value.tobytes()


def test_checkpoint_corrupt_and_mismatch(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_checkpoint(bad)
    with pytest.raises(ShapeError):
        MLP([2, 3, 1]).copy_from(MLP([2, 4, 1]))


def _identity_layer(activation):
    layer = Dense(2, 2, activation)
    layer.W.value[...] = np.eye(2)
    return layer


def test_dense_examples():
    np.testing.assert_array_equal(_identity_layer("identity").predict(np.array([[1.0, -2.0]])), [[1.0, -2.0]])
    np.testing.assert_allclose(_identity_layer("leaky_relu").predict(np.array([[1.0, -2.0]])), [[1.0, -0.02]])
    layer = Dense(2, 3, rng=np.random.default_rng(5))
    layer.b.value[...] = [0.1, -0.2, 0.3]
    np.testing.assert_array_equal(layer.predict(np.zeros((1, 2))), [[0.1, -0.2, 0.3]])


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e6, -1e-6))
def test_leaky_relu_slope_exact(x):
    layer = _identity_layer("leaky_relu")
    out = layer.predict(np.array([[x, 1.0]]))
    assert out[0, 0] == 0.01 * x


def test_lstm_zero_parameters_and_empty_cell():
    cell = LSTMCell(3, 4, forget_bias=0.0)
    for p in cell.parameters():
        p.value[...] = 0.0
    h, state = cell.step(np.array([[1.0, -2.0, 3.0]]), cell.initial_state(1))
    np.testing.assert_array_equal(h, 0.0)
    np.testing.assert_array_equal(state.c, 0.0)
    big_forget = LSTMCell(2, 3, forget_bias=50.0)
    for p in (big_forget.W_x, big_forget.W_h):
        p.value[...] = 0.0
    _, state = big_forget.step(np.zeros((1, 2)), big_forget.initial_state(1))
    np.testing.assert_array_equal(state.c, 0.0)


def test_lstm_one_unit_hand_computed():
    cell = LSTMCell(1, 1, forget_bias=0.0)
    cell.W_x.value[:, 0] = [0.5, -1.0, 2.0, 1.5]     # i, f, g, o
    cell.W_h.value[...] = 0.0
    h, state = cell.step(np.array([[1.0]]), HiddenState(np.zeros((1, 1)), np.array([[0.4]])))
    sig = lambda z: 1 / (1 + np.exp(-z))
    c = sig(-1.0) * 0.4 + sig(0.5) * np.tanh(2.0)
    assert abs(state.c[0, 0] - c) < 1e-15
    assert abs(h[0, 0] - sig(1.5) * np.tanh(c)) < 1e-15


def test_backward_examples():
    layer = Dense(3, 2)
    x = np.array([[1.0, 2.0, -3.0]])
    y = layer.forward(x)
    layer.backward(np.ones_like(y))
    np.testing.assert_array_equal(layer.W.grad, np.outer(np.ones(2), x[0]))
    net = MLP([3, 4, 2])
    net.forward(x)
    net.backward(np.zeros((1, 2)))
    assert all(not np.any(p.grad) for p in net.parameters())


def test_linear_quadratic_gradient_check_tight():
    rng = np.random.default_rng(6)
    layer = MLP([3, 2], rng)
    rep = gradient_check(layer.parameters(), _sq_loss(layer, rng.normal(size=(4, 3)), rng.normal(size=(4, 2))))
    assert rep.max_rel_error < 1e-6


def test_adam_constant_gradient_sign():
    p = Parameter("w", np.array([0.0, 0.0]))
    state = AdamState(learning_rate=0.01)
    for _ in range(50):
        p.grad[...] = [2.0, -0.5]
        adam_step(state, [p])
    assert p.value[0] < 0 < p.value[1]


def test_adam_scalar_first_step():
    p = Parameter("w", np.array([0.0]))
    p.grad[...] = 1.0
    adam_step(AdamState(learning_rate=0.1), [p])
    assert abs(p.value[0] + 0.1) < 1e-8


def test_forward_deterministic():
    net = RecurrentNet(3, 5, 2, np.random.default_rng(7))
    xs = np.random.default_rng(8).normal(size=(3, 2, 3))
    assert net.predict(xs).tobytes() == net.predict(xs).tobytes()
