"""Minimal layer engine for word-matrix classifiers.

Layers operate on float64 numpy batches: (batch, length, width) between
convolution stages and (batch, features) after flattening. Convolution
kernels span the full input width, so each filter yields a 1-D feature
map; chaining convolutions treats the previous filter outputs as the new
width. Every layer implements exact reverse-mode gradients, checked
against central finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BCE_EPS = 1e-12


class ShapeError(ValueError):
    """Layer input shape incompatible with the layer's configuration."""


class NumericError(RuntimeError):
    """Non-finite value encountered where the training contract forbids it."""


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NumericError("softmax received non-finite input")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def bce_loss(p, y) -> float:
    """Mean binary cross-entropy of predicted SR probabilities.

    Probabilities are clamped to [eps, 1-eps] so the loss stays finite at
    p = 0 or 1.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(np.mean(losses))


class Layer:
    """Base layer: forward caches whatever backward needs."""

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv(Layer):
    """Valid, stride-1 convolution with full-width n-gram kernels.

    Input (B, L, W) -> output (B, L - n + 1, F).
    """

    def __init__(self, kernel_len: int, in_width: int, filters: int):
        if kernel_len < 1 or in_width < 1 or filters < 1:
            raise ValueError("kernel_len, in_width and filters must be >= 1")
        self.kernel_len = kernel_len
        self.in_width = in_width
        self.filters = filters
        self.kernels = np.zeros((filters, kernel_len, in_width))
        self.bias = np.zeros(filters)
        self.d_kernels = np.zeros_like(self.kernels)
        self.d_bias = np.zeros_like(self.bias)
        self._cols = None

    def params(self):
        return [self.kernels, self.bias]

    def grads(self):
        return [self.d_kernels, self.d_bias]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_width:
            raise ShapeError(
                f"conv expects (batch, length, {self.in_width}), got {x.shape}"
            )
        n = self.kernel_len
        batch, length, width = x.shape
        if n > length:
            raise ShapeError(f"kernel length {n} exceeds input length {length}")
        out_len = length - n + 1
        # (B, L', W, n) -> (B, L', n, W) -> (B*L', n*W)
        windows = sliding_window_view(x, n, axis=1).transpose(0, 1, 3, 2)
        cols = np.ascontiguousarray(windows).reshape(batch * out_len, n * width)
        out = cols @ self.kernels.reshape(self.filters, -1).T + self.bias
        self._cols = cols
        self._in_shape = x.shape
        return out.reshape(batch, out_len, self.filters)

    def backward(self, grad):
        batch, out_len, _ = grad.shape
        n, width = self.kernel_len, self.in_width
        g2 = grad.reshape(batch * out_len, self.filters)
        self.d_kernels[...] = (g2.T @ self._cols).reshape(self.kernels.shape)
        self.d_bias[...] = g2.sum(axis=0)
        dcols = (g2 @ self.kernels.reshape(self.filters, -1)).reshape(
            batch, out_len, n, width
        )
        dx = np.zeros(self._in_shape)
        for offset in range(n):
            dx[:, offset:offset + out_len, :] += dcols[:, :, offset, :]
        return dx


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class MaxPool(Layer):
    """Max pooling along the length axis (valid, window=stride=2 default)."""

    def __init__(self, window: int = 2, stride: int | None = None):
        if window < 1:
            raise ValueError("pool window must be >= 1")
        self.window = window
        self.stride = stride if stride is not None else window

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3:
            raise ShapeError(f"max pool expects (batch, length, width), got {x.shape}")
        batch, length, width = x.shape
        if length < self.window:
            raise ShapeError(
                f"pool window {self.window} exceeds input length {length}"
            )
        windows = sliding_window_view(x, self.window, axis=1)[:, ::self.stride]
        self._argmax = windows.argmax(axis=3)
        self._in_shape = x.shape
        return windows.max(axis=3)

    def backward(self, grad):
        batch, out_len, width = grad.shape
        dx = np.zeros(self._in_shape)
        b_idx, j_idx, f_idx = np.meshgrid(
            np.arange(batch), np.arange(out_len), np.arange(width), indexing="ij"
        )
        pos = j_idx * self.stride + self._argmax
        np.add.at(dx, (b_idx, pos, f_idx), grad)
        return dx


class GlobalMaxPool(Layer):
    """Reduce each feature map to its single maximum cell.

    The gradient flows to the first argmax position only.
    """

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3:
            raise ShapeError(f"global max pool expects 3-d input, got {x.shape}")
        if x.shape[1] < 1:
            raise ShapeError("global max pool needs a non-empty length axis")
        self._argmax = x.argmax(axis=1)
        self._in_shape = x.shape
        return x.max(axis=1)

    def backward(self, grad):
        batch, width = grad.shape
        dx = np.zeros(self._in_shape)
        b_idx, f_idx = np.meshgrid(np.arange(batch), np.arange(width), indexing="ij")
        dx[b_idx, self._argmax, f_idx] = grad
        return dx


class Flatten(Layer):
    def forward(self, x, train=False, rng=None):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._in_shape)


class Dense(Layer):
    """Affine map x -> x W^T + b with W of shape (out, in)."""

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weights = np.zeros((out_features, in_features))
        self.bias = np.zeros(out_features)
        self.d_weights = np.zeros_like(self.weights)
        self.d_bias = np.zeros_like(self.bias)

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.d_weights, self.d_bias]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"dense expects (batch, {self.in_features}), got {x.shape}"
            )
        self._x = x
        return x @ self.weights.T + self.bias

    def backward(self, grad):
        self.d_weights[...] = grad.T @ self._x
        self.d_bias[...] = grad.sum(axis=0)
        return grad @ self.weights


class Dropout(Layer):
    """Inverted dropout: train-time zeroing with 1/(1-rate) rescaling,
    identity at inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class Softmax(Layer):
    def forward(self, x, train=False, rng=None):
        self._probs = softmax(x)
        return self._probs

    def backward(self, grad):
        p = self._probs
        return p * (grad - (grad * p).sum(axis=-1, keepdims=True))


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def forward(self, x, train=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


class Parallel(Layer):
    """Feed the same input through every branch and concatenate the
    per-sample output vectors."""

    def __init__(self, branches: list[Sequential]):
        self.branches = list(branches)

    def params(self):
        return [p for branch in self.branches for p in branch.params()]

    def grads(self):
        return [g for branch in self.branches for g in branch.grads()]

    def forward(self, x, train=False, rng=None):
        outs = [branch.forward(x, train=train, rng=rng) for branch in self.branches]
        self._widths = [o.shape[1] for o in outs]
        return np.concatenate(outs, axis=1)

    def backward(self, grad):
        dx = None
        start = 0
        for branch, width in zip(self.branches, self._widths):
            piece = branch.backward(grad[:, start:start + width])
            dx = piece if dx is None else dx + piece
            start += width
        return dx


class Network:
    """An ordered layer graph with helpers for training and snapshots."""

    def __init__(self, root: Sequential):
        self.root = root

    def params(self) -> list[np.ndarray]:
        return self.root.params()

    def grads(self) -> list[np.ndarray]:
        return self.root.grads()

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        return self.root.forward(np.asarray(x, dtype=np.float64),
                                 train=train, rng=rng)

    def backward(self, grad: np.ndarray) -> None:
        self.root.backward(grad)

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        for p, saved in zip(self.params(), snapshot, strict=True):
            p[...] = saved

    def iter_layers(self):
        stack = [self.root]
        while stack:
            layer = stack.pop()
            yield layer
            if isinstance(layer, Sequential):
                stack.extend(reversed(layer.layers))
            elif isinstance(layer, Parallel):
                stack.extend(reversed(layer.branches))


def bce_prob_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean BCE with respect to the softmax output pair.

    Combined with the softmax backward this yields exactly
    (probs - one_hot) / batch at the logits.
    """
    batch = probs.shape[0]
    y = np.asarray(labels, dtype=np.int64)
    grad = np.zeros_like(probs)
    grad[np.arange(batch), y] = -1.0 / np.maximum(
        probs[np.arange(batch), y], BCE_EPS
    )
    return grad / batch


def loss_and_gradients(network: Network, inputs: np.ndarray,
                       labels: np.ndarray, train: bool = False,
                       rng: np.random.Generator | None = None):
    """Forward + reverse pass: mean BCE and gradients for every parameter.

    Dropout masks sampled during the forward pass are reused in the
    backward pass.
    """
    probs = network.forward(inputs, train=train, rng=rng)
    loss = bce_loss(probs[:, 1], labels)
    network.backward(bce_prob_grad(probs, labels))
    return loss, network.grads()


def accuracy_from_probs(probs: np.ndarray, labels: np.ndarray,
                        threshold: float = 0.5) -> float:
    predicted = (probs[:, 1] >= threshold).astype(np.int64)
    return float(np.mean(predicted == np.asarray(labels)))


class SGD:
    """Plain stochastic gradient descent: w <- w - lr * g."""

    def __init__(self, lr: float = 0.01):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads, strict=True):
            if not np.isfinite(g).all():
                raise NumericError("non-finite gradient in SGD step")
            p -= self.lr * g


class Adam:
    """Adam with bias correction (defaults lr 1e-3, betas 0.9/0.999)."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self._m, self._v, strict=True):
            if not np.isfinite(g).all():
                raise NumericError("non-finite gradient in Adam step")
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name: str, lr: float | None = None):
    """Build an optimizer by name ('adam' default, 'sgd' available)."""
    name = name.lower()
    if name == "adam":
        return Adam(lr=lr if lr is not None else 1e-3)
    if name == "sgd":
        return SGD(lr=lr if lr is not None else 0.01)
    raise ValueError(f"unknown optimizer {name!r}")
