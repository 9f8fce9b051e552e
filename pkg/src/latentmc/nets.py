"""Recurrent and convolutional sequence primitives.

Cells operate on batched rows: inputs (B, input_dim), states (B, hidden_dim).
Stacks unroll a whole (B, T, input_dim) tensor through time and layers.
Causal convolution depends on the current step and the previous ``delta``
steps only, with zero left padding.

Initialization: matrices uniform on +-1/sqrt(hidden_dim), biases zero, LSTM
forget-gate bias 1.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError

__all__ = ["Linear", "RNNCell", "GRUCell", "LSTMCell", "StackedRecurrence", "CausalConv", "make_cell"]


def _uniform(rng, fan, shape):
    bound = 1.0 / np.sqrt(fan)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = Tensor(_uniform(rng, in_dim, (in_dim, out_dim)), requires_grad=True)
        self.b = Tensor(np.zeros((1, out_dim)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise DimensionError(f"linear expected last dim {self.in_dim}, got {x.shape}")
        return ad.matmul(x, self.w) + self.b

    def params(self, prefix: str):
        return [(f"{prefix}/w", self.w), (f"{prefix}/b", self.b)]


class RNNCell:
    kind = "rnn"
    gates = 1

    def __init__(self, input_dim: int, hidden_dim: int, rng):
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        self.wx = Tensor(_uniform(rng, hidden_dim, (input_dim, hidden_dim)), requires_grad=True)
        self.wh = Tensor(_uniform(rng, hidden_dim, (hidden_dim, hidden_dim)), requires_grad=True)
        self.b = Tensor(np.zeros((1, hidden_dim)), requires_grad=True)

    def init_state(self, batch: int):
        return ad.zeros(batch, self.hidden_dim)

    def step(self, x: Tensor, state: Tensor) -> Tensor:
        self._check(x)
        return ad.tanh(ad.matmul(x, self.wx) + ad.matmul(state, self.wh) + self.b)

    def output(self, state: Tensor) -> Tensor:
        return state

    def _check(self, x):
        if x.shape[-1] != self.input_dim:
            raise DimensionError(f"{self.kind} cell expected input dim {self.input_dim}, got {x.shape}")

    def params(self, prefix: str):
        return [(f"{prefix}/wx", self.wx), (f"{prefix}/wh", self.wh), (f"{prefix}/b", self.b)]


class GRUCell(RNNCell):
    kind = "gru"
    gates = 3

    def __init__(self, input_dim: int, hidden_dim: int, rng):
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        h = hidden_dim
        self.wx = Tensor(_uniform(rng, h, (input_dim, 3 * h)), requires_grad=True)
        self.wh = Tensor(_uniform(rng, h, (h, 3 * h)), requires_grad=True)
        self.b = Tensor(np.zeros((1, 3 * h)), requires_grad=True)

    def step(self, x: Tensor, state: Tensor) -> Tensor:
        self._check(x)
        h = self.hidden_dim
        gx = ad.matmul(x, self.wx) + self.b
        gh = ad.matmul(state, self.wh)
        r = ad.sigmoid(gx[:, 0:h] + gh[:, 0:h])
        z = ad.sigmoid(gx[:, h : 2 * h] + gh[:, h : 2 * h])
        n = ad.tanh(gx[:, 2 * h : 3 * h] + r * gh[:, 2 * h : 3 * h])
        return z * state + (1.0 - z) * n


class LSTMCell(RNNCell):
    kind = "lstm"
    gates = 4

    def __init__(self, input_dim: int, hidden_dim: int, rng):
        self.input_dim, self.hidden_dim = input_dim, hidden_dim
        h = hidden_dim
        self.wx = Tensor(_uniform(rng, h, (input_dim, 4 * h)), requires_grad=True)
        self.wh = Tensor(_uniform(rng, h, (h, 4 * h)), requires_grad=True)
        bias = np.zeros((1, 4 * h))
        bias[:, h : 2 * h] = 1.0  # forget gate bias, stabilizes early training
        self.b = Tensor(bias, requires_grad=True)

    def init_state(self, batch: int):
        return (ad.zeros(batch, self.hidden_dim), ad.zeros(batch, self.hidden_dim))

    def step(self, x: Tensor, state) -> tuple:
        self._check(x)
        h_prev, c_prev = state
        h = self.hidden_dim
        g = ad.matmul(x, self.wx) + ad.matmul(h_prev, self.wh) + self.b
        i = ad.sigmoid(g[:, 0:h])
        f = ad.sigmoid(g[:, h : 2 * h])
        cand = ad.tanh(g[:, 2 * h : 3 * h])
        o = ad.sigmoid(g[:, 3 * h : 4 * h])
        c = f * c_prev + i * cand
        return (o * ad.tanh(c), c)

    def output(self, state) -> Tensor:
        return state[0]


_CELL_KINDS = {"rnn": RNNCell, "gru": GRUCell, "lstm": LSTMCell}


def make_cell(kind: str, input_dim: int, hidden_dim: int, rng):
    return _CELL_KINDS[kind](input_dim, hidden_dim, rng)


class StackedRecurrence:
    """Ordered stack of cells; layer i feeds layer i+1."""

    def __init__(self, kind: str, input_dim: int, hidden_dims, rng):
        self.cells = []
        prev = input_dim
        for h in hidden_dims:
            self.cells.append(make_cell(kind, prev, h, rng))
            prev = h
        self.out_dim = prev

    def unroll(self, xs: Tensor) -> Tensor:
        """xs: (B, T, input_dim) -> top-layer outputs (B, T, out_dim), h_0 = 0."""
        if xs.ndim != 3:
            raise DimensionError(f"unroll expects (B, T, d), got {xs.shape}")
        B, T, _ = xs.shape
        if T < 1:
            raise DimensionError("empty sequence")
        states = [c.init_state(B) for c in self.cells]
        outs = []
        for t in range(T):
            inp = xs[:, t, :]
            for i, cell in enumerate(self.cells):
                states[i] = cell.step(inp, states[i])
                inp = cell.output(states[i])
            outs.append(inp)
        return ad.stack(outs, axis=1)

    def params(self, prefix: str):
        out = []
        for i, c in enumerate(self.cells):
            out.extend(c.params(f"{prefix}/layer{i}"))
        return out


class CausalConv:
    """1-D causal convolution: y_t = sum_{delta=0}^{D} x_{t-delta} W_delta + b."""

    def __init__(self, delta: int, channels_in: int, channels_out: int, rng):
        if delta < 0:
            raise DimensionError("receptive field must be non-negative")
        self.delta = delta
        self.channels_in, self.channels_out = channels_in, channels_out
        self.w = Tensor(
            _uniform(rng, channels_in * (delta + 1), (delta + 1, channels_in, channels_out)),
            requires_grad=True,
        )
        self.b = Tensor(np.zeros((1, channels_out)), requires_grad=True)

    def __call__(self, xs: Tensor) -> Tensor:
        """xs: (B, T, channels_in) -> (B, T, channels_out)."""
        if xs.ndim != 3 or xs.shape[-1] != self.channels_in:
            raise DimensionError(f"causal conv expected (B, T, {self.channels_in}), got {xs.shape}")
        B, T, _ = xs.shape
        if T < 1:
            raise DimensionError("empty sequence")
        y = None
        for d in range(min(self.delta, T - 1) + 1):
            tap = xs if d == 0 else ad.concat([ad.zeros(B, d, self.channels_in), xs[:, : T - d, :]], axis=1)
            term = ad.matmul(tap, self.w[d])
            y = term if y is None else y + term
        return y + self.b

    def params(self, prefix: str):
        return [(f"{prefix}/w", self.w), (f"{prefix}/b", self.b)]
