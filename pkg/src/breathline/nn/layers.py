"""Feedforward layers.

Shared contract: `forward(x, training=False)` on (batch, time, channels)
float64 arrays. A training forward caches whatever `backward` needs; an
inference forward writes no instance state. `backward(grad)` consumes
the most recent training cache, replaces the layer's parameter
gradients, and returns the gradient with respect to the input.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, ShapeError, TrainingError


class Layer:
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def params(self) -> dict[str, np.ndarray]:
        return {}

    @property
    def grads(self) -> dict[str, np.ndarray]:
        return {}


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv1D(Layer):
    """1-D convolution over time, stride 1, zero 'same' padding so the
    output keeps the input length. Weights are (kernel, in, out)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator):
        if kernel_size < 1 or in_channels < 1 or out_channels < 1:
            raise ConfigError("Conv1D sizes must be positive")
        self.kernel_size = kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = kernel_size * in_channels
        self.w = glorot_uniform(rng, (kernel_size, in_channels, out_channels), fan_in, kernel_size * out_channels)
        self.b = np.zeros(out_channels)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._cache = None

    @property
    def params(self):
        return {"w": self.w, "b": self.b}

    @property
    def grads(self):
        return {"w": self.grad_w, "b": self.grad_b}

    def _pad(self):
        left = (self.kernel_size - 1) // 2
        return left, self.kernel_size - 1 - left

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"Conv1D expected (batch, time, {self.in_channels}), got {x.shape}")
        batch, time, _ = x.shape
        left, right = self._pad()
        xpad = np.zeros((batch, time + left + right, self.in_channels))
        xpad[:, left : left + time] = x
        # im2col: (batch, time, kernel, in) -> one matmul
        cols = np.lib.stride_tricks.sliding_window_view(xpad, self.kernel_size, axis=1)
        cols = cols.transpose(0, 1, 3, 2).reshape(batch * time, self.kernel_size * self.in_channels)
        y = cols @ self.w.reshape(-1, self.out_channels) + self.b
        if training:
            self._cache = (cols, x.shape)
        return y.reshape(batch, time, self.out_channels)

    def backward(self, grad):
        cols, x_shape = self._cache
        batch, time, _ = x_shape
        grad_flat = grad.reshape(batch * time, self.out_channels)
        self.grad_w = (cols.T @ grad_flat).reshape(self.w.shape)
        self.grad_b = grad_flat.sum(axis=0)
        gcols = (grad_flat @ self.w.reshape(-1, self.out_channels).T).reshape(
            batch, time, self.kernel_size, self.in_channels
        )
        left, right = self._pad()
        gxpad = np.zeros((batch, time + left + right, self.in_channels))
        for k in range(self.kernel_size):
            gxpad[:, k : k + time] += gcols[:, :, k]
        return gxpad[:, left : left + time]


class BatchNorm1D(Layer):
    """Per-channel batch normalization over the batch and time axes.
    Training uses batch statistics and updates the running estimates;
    inference uses the running estimates."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9):
        self.eps = eps
        self.momentum = momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self._cache = None

    @property
    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    @property
    def grads(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def forward(self, x, training=False):
        if training:
            mean = x.mean(axis=(0, 1))
            var = x.var(axis=(0, 1))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            self._cache = (xhat, inv_std)
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return self.gamma * xhat + self.beta

    def backward(self, grad):
        xhat, inv_std = self._cache
        n = xhat.shape[0] * xhat.shape[1]
        self.grad_gamma = np.sum(grad * xhat, axis=(0, 1))
        self.grad_beta = np.sum(grad, axis=(0, 1))
        # gradient through the batch statistics themselves
        dxhat = grad * self.gamma
        return (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=(0, 1)) - xhat * np.sum(dxhat * xhat, axis=(0, 1))
        )


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        if training:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return grad * self._mask


class MaxPool1D(Layer):
    """Max pooling over time with ceil-mode output length ceil(T/stride).
    When windows run past the ends they see -inf padding, split evenly."""

    def __init__(self, pool_size: int, stride: int):
        if pool_size < 1 or stride < 1:
            raise ConfigError("pool_size and stride must be positive")
        self.pool_size = pool_size
        self.stride = stride
        self._cache = None

    def output_length(self, time: int) -> int:
        return -(-time // self.stride)

    def forward(self, x, training=False):
        batch, time, channels = x.shape
        out_t = self.output_length(time)
        total_pad = max((out_t - 1) * self.stride + self.pool_size - time, 0)
        left = total_pad // 2
        xpad = np.full((batch, time + total_pad, channels), -np.inf)
        xpad[:, left : left + time] = x
        windows = np.lib.stride_tricks.sliding_window_view(xpad, self.pool_size, axis=1)
        windows = windows[:, :: self.stride]  # (batch, out_t, channels, pool)
        argmax = windows.argmax(axis=3)
        if training:
            self._cache = (argmax, x.shape, left)
        return np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]

    def backward(self, grad):
        argmax, (batch, time, channels), left = self._cache
        out_t = grad.shape[1]
        total_pad = max((out_t - 1) * self.stride + self.pool_size - time, 0)
        gxpad = np.zeros((batch, time + total_pad, channels))
        b_idx, t_idx, c_idx = np.indices(grad.shape, sparse=True)
        np.add.at(gxpad, (b_idx, t_idx * self.stride + argmax, c_idx), grad)
        return gxpad[:, left : left + time]


class Dropout(Layer):
    """Inverted dropout. A training forward needs a generator to draw a
    fresh mask; passing rng=None reuses the previous mask, which keeps
    the loss surface fixed for finite-difference checks."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.mask = None

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            return x
        if rng is not None:
            self.mask = rng.random(x.shape) >= self.rate
        elif self.mask is None or self.mask.shape != x.shape:
            raise TrainingError("Dropout training forward needs an rng to draw a mask")
        return x * self.mask / (1.0 - self.rate)

    def backward(self, grad):
        if self.rate == 0.0:
            return grad
        return grad * self.mask / (1.0 - self.rate)


class TimeDense(Layer):
    """Dense layer applied independently at every timestep."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        self.w = glorot_uniform(rng, (in_channels, out_channels), in_channels, out_channels)
        self.b = np.zeros(out_channels)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._cache = None

    @property
    def params(self):
        return {"w": self.w, "b": self.b}

    @property
    def grads(self):
        return {"w": self.grad_w, "b": self.grad_b}

    def forward(self, x, training=False):
        if training:
            self._cache = x
        return x @ self.w + self.b

    def backward(self, grad):
        x = self._cache
        self.grad_w = np.einsum("btc,bto->co", x, grad)
        self.grad_b = grad.sum(axis=(0, 1))
        return grad @ self.w.T


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x, training=False):
        y = expit(x)
        if training:
            self._y = y
        return y

    def backward(self, grad):
        return grad * self._y * (1.0 - self._y)
