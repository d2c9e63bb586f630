"""From-scratch multilayer perceptron: forward pass and exact gradients.

ReLU hidden layers, identity output. The only loss used here is the
half-mean-squared Bellman residual where each sample contributes through
the output of its taken action alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergedError

DEFAULT_HIDDEN = (60, 30, 15)


@dataclass
class MlpParameters:
    weights: list  # per layer, shape (fan_in, fan_out)
    biases: list  # per layer, shape (fan_out,)

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "MlpParameters":
        return MlpParameters([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def check_finite(self) -> None:
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise TrainingDivergedError("non-finite network parameters")


def init_params(layer_sizes, rng: np.random.Generator) -> MlpParameters:
    """Uniform(-limit, limit) init with limit = sqrt(6 / (fan_in + fan_out))."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParameters(weights, biases)


def forward(params: MlpParameters, x) -> np.ndarray:
    """Q-value vector for a single flattened state."""
    return forward_batch(params, np.asarray(x, dtype=float)[None, :])[0]


def forward_batch(params: MlpParameters, x: np.ndarray) -> np.ndarray:
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def _forward_cached(params, x):
    activations = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
        activations.append(h)
    return activations


def gradient(params: MlpParameters, states: np.ndarray, actions: np.ndarray,
             targets: np.ndarray):
    """Gradient of L = mean over the batch of 1/2 (Q(s, a) - target)^2.

    Only the taken action's output enters each sample's residual. Returns
    ``(grad_weights, grad_biases, loss)``.
    """
    n = states.shape[0]
    acts = _forward_cached(params, states)
    q = acts[-1]
    q_taken = q[np.arange(n), actions]
    residual = q_taken - targets
    loss = float(0.5 * np.mean(residual ** 2))
    if not np.isfinite(loss):
        raise TrainingDivergedError("non-finite loss in gradient computation")

    delta = np.zeros_like(q)
    delta[np.arange(n), actions] = residual / n

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for i in reversed(range(len(params.weights))):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (acts[i] > 0.0)
    return grad_w, grad_b, loss


def sgd_update(params: MlpParameters, grad_w, grad_b, lr: float) -> None:
    for w, gw in zip(params.weights, grad_w):
        w -= lr * gw
    for b, gb in zip(params.biases, grad_b):
        b -= lr * gb
    params.check_finite()


def argmax_action(params: MlpParameters, state) -> int:
    """Greedy action; ties resolve to the lowest index (np.argmax semantics)."""
    return int(np.argmax(forward(params, state)))
