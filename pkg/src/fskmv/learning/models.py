"""Small classifiers with flat parameter vectors and analytic cross-entropy gradients."""

from __future__ import annotations

import numpy as np
from scipy.special import log_softmax, softmax


def _xent(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    logp = log_softmax(logits, axis=1)
    n = len(y)
    loss = -logp[np.arange(n), y].mean()
    d = softmax(logits, axis=1)
    d[np.arange(n), y] -= 1.0
    return float(loss), d / n


class LinearSoftmax:
    """Multinomial logistic regression; ``w = [W.ravel(), b]`` with ``W`` of shape (C, d)."""

    def __init__(self, dim: int, n_classes: int = 10):
        self.dim = dim
        self.n_classes = n_classes

    @property
    def n_params(self) -> int:
        return self.n_classes * self.dim + self.n_classes

    def init_params(self, rng: np.random.Generator | None = None) -> np.ndarray:
        return np.zeros(self.n_params)

    def _unpack(self, w):
        c, d = self.n_classes, self.dim
        return w[: c * d].reshape(c, d), w[c * d :]

    def logits(self, w, x) -> np.ndarray:
        weights, bias = self._unpack(w)
        return x @ weights.T + bias

    def loss(self, w, x, y) -> float:
        logp = log_softmax(self.logits(w, x), axis=1)
        return float(-logp[np.arange(len(y)), y].mean())

    def loss_and_grad(self, w, x, y) -> tuple[float, np.ndarray]:
        loss, dz = _xent(self.logits(w, x), y)
        return loss, np.concatenate([(dz.T @ x).ravel(), dz.sum(axis=0)])


class OneHiddenLayer:
    """``tanh`` perceptron with one hidden layer.

    Layout: ``[W1 (h, d), b1 (h), W2 (C, h), b2 (C)]``.
    """

    def __init__(self, dim: int, hidden: int = 32, n_classes: int = 10):
        self.dim = dim
        self.hidden = hidden
        self.n_classes = n_classes

    @property
    def n_params(self) -> int:
        h, d, c = self.hidden, self.dim, self.n_classes
        return h * d + h + c * h + c

    def init_params(self, rng: np.random.Generator | None = None) -> np.ndarray:
        if rng is None:
            raise ValueError("hidden-layer weights need a random generator")
        h, d, c = self.hidden, self.dim, self.n_classes
        w1 = rng.standard_normal((h, d)) / np.sqrt(d)
        w2 = rng.standard_normal((c, h)) / np.sqrt(h)
        return np.concatenate([w1.ravel(), np.zeros(h), w2.ravel(), np.zeros(c)])

    def _unpack(self, w):
        h, d, c = self.hidden, self.dim, self.n_classes
        i = 0
        w1 = w[i : i + h * d].reshape(h, d)
        i += h * d
        b1 = w[i : i + h]
        i += h
        w2 = w[i : i + c * h].reshape(c, h)
        i += c * h
        return w1, b1, w2, w[i:]

    def _forward(self, w, x):
        w1, b1, w2, b2 = self._unpack(w)
        a = np.tanh(x @ w1.T + b1)
        return a, a @ w2.T + b2

    def logits(self, w, x) -> np.ndarray:
        return self._forward(w, x)[1]

    def loss(self, w, x, y) -> float:
        logp = log_softmax(self.logits(w, x), axis=1)
        return float(-logp[np.arange(len(y)), y].mean())

    def loss_and_grad(self, w, x, y) -> tuple[float, np.ndarray]:
        w1, _, w2, _ = self._unpack(w)
        a, z = self._forward(w, x)
        loss, dz = _xent(z, y)
        g_w2 = dz.T @ a
        g_b2 = dz.sum(axis=0)
        da = (dz @ w2) * (1 - a**2)
        g_w1 = da.T @ x
        g_b1 = da.sum(axis=0)
        return loss, np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])


def build_model(kind: str, dim: int, n_classes: int = 10, hidden: int = 32):
    if kind == "linear":
        return LinearSoftmax(dim, n_classes)
    if kind == "mlp":
        return OneHiddenLayer(dim, hidden, n_classes)
    raise ValueError(f"unknown model kind {kind!r}; expected 'linear' or 'mlp'")
