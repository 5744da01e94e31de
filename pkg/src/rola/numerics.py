"""Small differentiable-network core: dense and LSTM layers with hand-written
backward passes, Adam, gradient clipping, finite-difference checking and
parameter checkpoints.

Everything is float64. Layers cache what backward needs on ``forward`` and drop
the cache after ``backward``; calling ``backward`` without a cached forward
raises :class:`BackwardStateError`.
"""
from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64
LEAKY_SLOPE = 0.01
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class BackwardStateError(RuntimeError):
    pass


class NumericalError(FloatingPointError):
    """A NaN/inf showed up in a loss or gradient."""


class UnsupportedConfiguration(ValueError):
    pass


@dataclass
class Parameter:
    """A learned array plus its accumulated gradient."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=DTYPE)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def leaky_relu(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0.0, z, LEAKY_SLOPE * z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


class Dense:
    """Fully connected layer ``activation(x @ W.T + b)`` on batches ``(N, n_in)``."""

    def __init__(self, n_in: int, n_out: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, name: str = "dense"):
        if activation not in ("identity", "leaky_relu"):
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.n_out = n_in, n_out
        self.activation = activation
        self.W = Parameter(f"{name}.W", _uniform_init(rng, (n_out, n_in), n_in))
        self.b = Parameter(f"{name}.b", np.zeros(n_out))
        self._cache = None

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]

    def _check(self, x: np.ndarray) -> None:
        if x.shape[-1] != self.n_in:
            raise ShapeError(
                f"dense layer expects input of width {self.n_in} (weights {self.W.shape}), "
                f"got input shape {x.shape}")

    def predict(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        z = x @ self.W.value.T + self.b.value
        return leaky_relu(z) if self.activation == "leaky_relu" else z

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        self._check(x)
        z = x @ self.W.value.T + self.b.value
        self._cache = (x, z)
        return leaky_relu(z) if self.activation == "leaky_relu" else z

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise BackwardStateError(f"{self.W.name}: backward called without a cached forward pass")
        x, z = self._cache
        self._cache = None
        dz = dy if self.activation == "identity" else np.where(z >= 0.0, dy, LEAKY_SLOPE * dy)
        x2 = x.reshape(-1, self.n_in)
        dz2 = dz.reshape(-1, self.n_out)
        self.W.grad += dz2.T @ x2
        self.b.grad += dz2.sum(axis=0)
        return dz @ self.W.value


@dataclass
class HiddenState:
    h: np.ndarray
    c: np.ndarray

    def copy(self) -> "HiddenState":
        return HiddenState(self.h.copy(), self.c.copy())


class LSTMCell:
    """LSTM with gate blocks stacked in the order input, forget, candidate, output.

    ``step`` advances one timestep without caching (acting); ``forward`` runs a
    whole ``(T, B, n_in)`` sequence and caches for backpropagation through time.
    """

    def __init__(self, n_in: int, hidden_size: int, rng: np.random.Generator | None = None,
                 name: str = "lstm", forget_bias: float = 1.0):
        rng = rng if rng is not None else np.random.default_rng(0)
        H = hidden_size
        self.n_in, self.hidden_size = n_in, H
        self.W_x = Parameter(f"{name}.W_x", _uniform_init(rng, (4 * H, n_in), n_in))
        self.W_h = Parameter(f"{name}.W_h", _uniform_init(rng, (4 * H, H), H))
        b = np.zeros(4 * H)
        b[H:2 * H] = forget_bias
        self.b = Parameter(f"{name}.b", b)
        self._cache = None

    def parameters(self) -> list[Parameter]:
        return [self.W_x, self.W_h, self.b]

    def initial_state(self, batch: int = 1) -> HiddenState:
        return HiddenState(np.zeros((batch, self.hidden_size)), np.zeros((batch, self.hidden_size)))

    def _gates(self, x, h_prev):
        H = self.hidden_size
        a = x @ self.W_x.value.T + h_prev @ self.W_h.value.T + self.b.value
        i = sigmoid(a[..., :H])
        f = sigmoid(a[..., H:2 * H])
        g = np.tanh(a[..., 2 * H:3 * H])
        o = sigmoid(a[..., 3 * H:])
        return i, f, g, o

    def step(self, x: np.ndarray, state: HiddenState) -> tuple[np.ndarray, HiddenState]:
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"LSTM expects input width {self.n_in}, got shape {x.shape}")
        i, f, g, o = self._gates(x, state.h)
        c = f * state.c + i * g
        h = o * np.tanh(c)
        return h, HiddenState(h, c)

    def forward(self, xs: np.ndarray, state: HiddenState | None = None) -> np.ndarray:
        xs = np.asarray(xs, dtype=DTYPE)
        if xs.ndim != 3 or xs.shape[-1] != self.n_in:
            raise ShapeError(f"LSTM expects (T, B, {self.n_in}) input, got shape {xs.shape}")
        T, B, _ = xs.shape
        state = state if state is not None else self.initial_state(B)
        H = self.hidden_size
        hs = np.empty((T + 1, B, H))
        cs = np.empty((T + 1, B, H))
        gates = np.empty((T, 4, B, H))
        tanh_c = np.empty((T, B, H))
        hs[0], cs[0] = state.h, state.c
        for t in range(T):
            i, f, g, o = self._gates(xs[t], hs[t])
            cs[t + 1] = f * cs[t] + i * g
            tanh_c[t] = np.tanh(cs[t + 1])
            hs[t + 1] = o * tanh_c[t]
            gates[t] = (i, f, g, o)
        self._cache = (xs, hs, cs, gates, tanh_c)
        return hs[1:].copy()

    def backward(self, dhs: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise BackwardStateError(f"{self.W_x.name}: backward called without a cached forward pass")
        xs, hs, cs, gates, tanh_c = self._cache
        self._cache = None
        T, B, _ = xs.shape
        H = self.hidden_size
        dxs = np.empty_like(xs)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        da = np.empty((B, 4 * H))
        for t in reversed(range(T)):
            i, f, g, o = gates[t]
            dh = dhs[t] + dh_next
            do = dh * tanh_c[t]
            dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
            di = dc * g
            dg = dc * i
            df = dc * cs[t]
            da[:, :H] = di * i * (1.0 - i)
            da[:, H:2 * H] = df * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dg * (1.0 - g ** 2)
            da[:, 3 * H:] = do * o * (1.0 - o)
            self.W_x.grad += da.T @ xs[t]
            self.W_h.grad += da.T @ hs[t]
            self.b.grad += da.sum(axis=0)
            dxs[t] = da @ self.W_x.value
            dh_next = da @ self.W_h.value
            dc_next = dc * f
        return dxs


class Network:
    """Shared parameter bookkeeping for the two architectures below."""

    layers: list

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def n_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(state) != {p.name for p in params}:
            raise ShapeError(f"parameter names differ: {sorted(state)} vs {[p.name for p in params]}")
        for p in params:
            if state[p.name].shape != p.shape:
                raise ShapeError(f"{p.name}: shape {state[p.name].shape} != {p.shape}")
            p.value[...] = state[p.name]

    def copy_from(self, other: "Network") -> None:
        mine, theirs = self.parameters(), other.parameters()
        if [p.shape for p in mine] != [p.shape for p in theirs]:
            raise ShapeError("architecture mismatch between live and target networks")
        for dst, src in zip(mine, theirs):
            dst.value[...] = src.value


class MLP(Network):
    """FC stack, leaky-ReLU on every hidden layer, identity output."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None, name: str = "mlp"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = list(sizes)
        self.layers = [
            Dense(sizes[k], sizes[k + 1],
                  "leaky_relu" if k < len(sizes) - 2 else "identity", rng, name=f"{name}.fc{k}")
            for k in range(len(sizes) - 1)
        ]

    def predict(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.predict(x)
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class RecurrentNet(Network):
    """FC(leaky-ReLU) -> LSTM -> FC, the actor and the local value-critic shape."""

    def __init__(self, n_in: int, hidden: int, n_out: int,
                 rng: np.random.Generator | None = None, name: str = "rnn"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.hidden, self.n_out = n_in, hidden, n_out
        self.fc_in = Dense(n_in, hidden, "leaky_relu", rng, name=f"{name}.fc_in")
        self.lstm = LSTMCell(hidden, hidden, rng, name=f"{name}.lstm")
        self.fc_out = Dense(hidden, n_out, "identity", rng, name=f"{name}.fc_out")
        self.layers = [self.fc_in, self.lstm, self.fc_out]

    def initial_state(self, batch: int = 1) -> HiddenState:
        return self.lstm.initial_state(batch)

    def step(self, x: np.ndarray, state: HiddenState) -> tuple[np.ndarray, HiddenState]:
        h, state = self.lstm.step(self.fc_in.predict(x), state)
        return self.fc_out.predict(h), state

    def predict(self, xs: np.ndarray) -> np.ndarray:
        """Outputs for a whole ``(T, B, n_in)`` sequence without caching."""
        state = self.initial_state(xs.shape[1])
        z = self.fc_in.predict(xs)
        out = np.empty(xs.shape[:2] + (self.n_out,))
        for t in range(xs.shape[0]):
            h, state = self.lstm.step(z[t], state)
            out[t] = self.fc_out.predict(h)
        return out

    def forward(self, xs: np.ndarray) -> np.ndarray:
        return self.fc_out.forward(self.lstm.forward(self.fc_in.forward(xs)))

    def backward(self, dys: np.ndarray) -> np.ndarray:
        return self.fc_in.backward(self.lstm.backward(self.fc_out.backward(dys)))


def check_finite(params: Iterable[Parameter], what: str = "grad") -> None:
    for p in params:
        arr = p.grad if what == "grad" else p.value
        if not np.all(np.isfinite(arr)):
            bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
            raise NumericalError(f"non-finite {what} in parameter block {p.name!r} ({bad} entries)")


def clip_grad_norm(params: Sequence[Parameter], max_norm: float | None) -> float:
    """Scale grads in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = math.sqrt(sum(float(np.vdot(p.grad, p.grad)) for p in params))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_stab: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[Parameter]) -> None:
    """One bias-corrected Adam update from ``p.grad``; grads are zeroed afterwards.

    When every gradient is exactly zero the moments still decay and the step
    counter advances, but parameters are left untouched.
    """
    check_finite(params)
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.value) for p in params]
        state.second_moment = [np.zeros_like(p.value) for p in params]
    if len(state.first_moment) != len(params) or any(
            m.shape != p.shape for m, p in zip(state.first_moment, params)):
        raise ShapeError("Adam moments do not match the parameter list")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    all_zero = not any(np.any(p.grad) for p in params)
    bc1, bc2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    for p, m, v in zip(params, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * p.grad
        v *= b2
        v += (1.0 - b2) * p.grad * p.grad
        if not all_zero:
            p.value -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon_stab)
        p.zero_grad()


class Adam:
    """Adam over a fixed parameter list, with optional global-norm clipping."""

    def __init__(self, params: Sequence[Parameter], lr: float, clip_norm: float | None = 10.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.clip_norm = clip_norm
        self.state = AdamState(learning_rate=lr, beta1=betas[0], beta2=betas[1], epsilon_stab=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        check_finite(self.params)
        clip_grad_norm(self.params, self.clip_norm)
        adam_step(self.state, self.params)


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    failures: list[tuple[str, tuple[int, ...], float, float, float]]

    @property
    def ok(self) -> bool:
        return not self.failures


def gradient_check(params: Sequence[Parameter], loss_fn: Callable[[], float],
                   tolerance: float = 1e-4, step: float = 1e-5,
                   max_params: int = 5000) -> GradCheckReport:
    """Compare analytic gradients with central differences for every entry.

    ``loss_fn`` must run a forward *and* backward pass (accumulating into
    ``p.grad``) and return the scalar loss. Relative error per entry is
    ``|a - n| / max(1e-8, |a| + |n|)``. Parameter values are restored; grads are
    left holding the analytic gradient.
    """
    params = list(params)
    total = sum(p.value.size for p in params)
    if total > max_params:
        raise UnsupportedConfiguration(f"gradient_check capped at {max_params} parameters, got {total}")
    if not params:
        return GradCheckReport(0.0, 0, [])
    for p in params:
        p.zero_grad()
    loss_fn()
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    failures = []
    for p, g in zip(params, analytic):
        flat = p.value.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            plus = loss_fn()
            flat[k] = orig - step
            minus = loss_fn()
            flat[k] = orig
            num = (plus - minus) / (2.0 * step)
            ana = g.reshape(-1)[k]
            rel = abs(ana - num) / max(1e-8, abs(ana) + abs(num))
            worst = max(worst, rel)
            if rel > tolerance:
                failures.append((p.name, np.unravel_index(k, p.shape), ana, num, rel))
    for p, g in zip(params, analytic):
        p.grad[...] = g
    return GradCheckReport(worst, total, failures)


def save_checkpoint(path: str | Path, networks: dict[str, Network], metadata: dict | None = None) -> None:
    """Write every tensor of every named network to one ``.npz`` archive.

    Arrays are stored verbatim (float64), so a load restores bit-identical
    parameters. ``metadata`` must be JSON-serialisable.
    """
    arrays = {}
    for net_name, net in networks.items():
        for p in net.parameters():
            arrays[f"{net_name}/{p.name}"] = p.value
    meta = {"format_version": CHECKPOINT_VERSION, "networks": sorted(networks), **(metadata or {})}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    """Inverse of :func:`save_checkpoint`: ``({net: {param: array}}, metadata)``."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            nets: dict[str, dict[str, np.ndarray]] = {}
            for key in data.files:
                if key == "__meta__":
                    continue
                net_name, pname = key.split("/", 1)
                nets.setdefault(net_name, {})[pname] = data[key].copy()
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as exc:
        raise ValueError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")
    return nets, meta
