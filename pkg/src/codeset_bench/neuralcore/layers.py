"""Feedforward layers: dense, activations, 1D convolution, max pooling,
embedding lookup, flatten, and inverted dropout.

Convolution and pooling operate on time-major word matrices: a single
example is [n, k] (n positions, k channels) and a batch is [B, n, k].
Single-example 2D inputs are accepted everywhere and return 2D outputs.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, ShapeError
from .core import Layer, Parameter, glorot_uniform


class Dense(Layer):
    """y = xW + b on [batch, in] -> [batch, out]."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str = "dense"):
        self.w = Parameter(f"{name}.W", glorot_uniform(rng, (n_in, n_out), n_in, n_out))
        self.b = Parameter(f"{name}.b", np.zeros(n_out))
        self._x = None

    def forward(self, x, train: bool = False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.w.shape[0]:
            raise ShapeError(
                f"dense expects [batch, {self.w.shape[0]}], got {x.shape}"
            )
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad):
        self.w.grad += self._x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.w.value.T

    def params(self):
        return [self.w, self.b]


class ReLU(Layer):
    def forward(self, x, train: bool = False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        return grad * self._mask


class Sigmoid(Layer):
    def forward(self, x, train: bool = False):
        # stable in both tails
        out = np.empty_like(x, dtype=np.float64)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, grad):
        return grad * self._out * (1.0 - self._out)


class Tanh(Layer):
    def forward(self, x, train: bool = False):
        self._out = np.tanh(x)
        return self._out

    def backward(self, grad):
        return grad * (1.0 - self._out**2)


def _as_batched(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"expected [n, k] or [batch, n, k], got shape {x.shape}")


class Conv1d(Layer):
    """Valid 1D convolution, stride 1: [B, n, k] -> [B, n-h+1, f].

    Each of the f filters spans the full channel width k over a window of
    h positions, so filters have shape [f, h, k].
    """

    def __init__(
        self,
        in_channels: int,
        n_filters: int,
        width: int,
        rng: np.random.Generator,
        name: str = "conv",
    ):
        if width < 1:
            raise ConfigError("filter width must be >= 1")
        fan_in = width * in_channels
        self.w = Parameter(
            f"{name}.W",
            glorot_uniform(rng, (n_filters, width, in_channels), fan_in, n_filters),
        )
        self.b = Parameter(f"{name}.b", np.zeros(n_filters))
        self.width = width
        self._x = None
        self._squeeze = False

    def forward(self, x, train: bool = False):
        x, self._squeeze = _as_batched(x)
        batch, n, k = x.shape
        h = self.width
        if k != self.w.shape[2]:
            raise ShapeError(f"conv1d expects {self.w.shape[2]} channels, got {k}")
        if n < h:
            raise ShapeError(f"input length {n} shorter than filter width {h}")
        self._x = x
        length = n - h + 1
        out = np.broadcast_to(self.b.value, (batch, length, self.w.shape[0])).copy()
        for dt in range(h):
            out += x[:, dt : dt + length, :] @ self.w.value[:, dt, :].T
        return out[0] if self._squeeze else out

    def backward(self, grad):
        if self._squeeze:
            grad = grad[None]
        x = self._x
        h = self.width
        length = grad.shape[1]
        dx = np.zeros_like(x)
        for dt in range(h):
            x_slice = x[:, dt : dt + length, :]
            self.w.grad[:, dt, :] += np.einsum("blf,blk->fk", grad, x_slice)
            dx[:, dt : dt + length, :] += grad @ self.w.value[:, dt, :]
        self.b.grad += grad.sum(axis=(0, 1))
        return dx[0] if self._squeeze else dx

    def params(self):
        return [self.w, self.b]


class MaxPool1d(Layer):
    """Per-channel window max: [B, m, f] -> [B, ceil(m/pool), f].

    The tail window may be shorter. Backward routes each window's
    gradient to the first position attaining the max.
    """

    def __init__(self, pool: int):
        if pool < 1:
            raise ConfigError("pool size must be >= 1")
        self.pool = pool

    def forward(self, x, train: bool = False):
        x, self._squeeze = _as_batched(x)
        batch, m, f = x.shape
        n_win = math.ceil(m / self.pool)
        out = np.empty((batch, n_win, f))
        self._argmax = np.empty((batch, n_win, f), dtype=np.int64)
        for w in range(n_win):
            lo = w * self.pool
            hi = min(lo + self.pool, m)
            window = x[:, lo:hi, :]
            idx = window.argmax(axis=1)  # first max per (batch, channel)
            self._argmax[:, w, :] = idx + lo
            out[:, w, :] = np.take_along_axis(window, idx[:, None, :], axis=1)[:, 0, :]
        self._in_shape = x.shape
        return out[0] if self._squeeze else out

    def backward(self, grad):
        if self._squeeze:
            grad = grad[None]
        dx = np.zeros(self._in_shape)
        batch, n_win, f = grad.shape
        b_idx = np.arange(batch)[:, None, None]
        f_idx = np.arange(f)[None, None, :]
        np.add.at(dx, (b_idx, self._argmax, f_idx), grad)
        return dx[0] if self._squeeze else dx


class MaxOverTime(Layer):
    """Max across all time positions: [B, m, f] -> [B, f]."""

    def forward(self, x, train: bool = False):
        x, self._squeeze = _as_batched(x)
        self._argmax = x.argmax(axis=1)
        self._in_shape = x.shape
        out = np.take_along_axis(x, self._argmax[:, None, :], axis=1)[:, 0, :]
        return out[0] if self._squeeze else out

    def backward(self, grad):
        if self._squeeze:
            grad = grad[None]
        dx = np.zeros(self._in_shape)
        batch, _, f = self._in_shape
        b_idx = np.arange(batch)[:, None]
        f_idx = np.arange(f)[None, :]
        np.add.at(dx, (b_idx, self._argmax, f_idx), grad)
        return dx[0] if self._squeeze else dx


class Flatten(Layer):
    def forward(self, x, train: bool = False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Embedding(Layer):
    """Index lookup [B, T] -> [B, T, d]; row 0 is the frozen pad row."""

    def __init__(self, matrix: np.ndarray, trainable: bool = True, name: str = "emb"):
        self.m = Parameter(f"{name}.M", np.array(matrix, dtype=np.float64), trainable)
        self._idx = None

    def forward(self, x, train: bool = False):
        idx = np.asarray(x)
        if not np.issubdtype(idx.dtype, np.integer):
            raise ShapeError("embedding input must be integer indices")
        self._idx = idx
        return self.m.value[idx]

    def backward(self, grad):
        if self.m.trainable:
            np.add.at(self.m.grad, self._idx, grad)
            self.m.grad[0] = 0.0  # pad row stays zero
        return None

    def params(self):
        return [self.m]


class Dropout(Layer):
    """Inverted dropout: train-time mask scaled by 1/(1-rate); identity
    in eval mode."""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self._mask = None

    def forward(self, x, train: bool = False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


def dropout(x, rate: float, mode: str, rng: np.random.Generator):
    """Functional dropout; mode is "train" or "eval"."""
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown dropout mode {mode!r}")
    layer = Dropout(rate, rng)
    return layer.forward(x, train=(mode == "train"))
