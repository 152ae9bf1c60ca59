"""Adam over pytrees and a plateau learning-rate schedule."""
from __future__ import annotations

from collections import deque
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class AdamState(NamedTuple):
    count: jax.Array
    mu: object
    nu: object


def adam_init(params) -> AdamState:
    zeros = jax.tree_util.tree_map(jnp.zeros_like, params)
    return AdamState(jnp.zeros((), dtype=jnp.int32), zeros, zeros)


def adam_step(params, grads, state: AdamState, lr, b1=BETA1, b2=BETA2, eps=EPS):
    """One Adam update; returns (params, state)."""
    count = state.count + 1
    mu = jax.tree_util.tree_map(lambda m, g: b1 * m + (1 - b1) * g, state.mu, grads)
    nu = jax.tree_util.tree_map(lambda v, g: b2 * v + (1 - b2) * g * g, state.nu, grads)
    c1 = 1 - b1 ** count
    c2 = 1 - b2 ** count
    params = jax.tree_util.tree_map(
        lambda p, m, v: p - lr * (m / c1) / (jnp.sqrt(v / c2) + eps), params, mu, nu
    )
    return params, AdamState(count, mu, nu)


class PlateauSchedule:
    """Multiply the learning rate by ``factor`` when the objective stops improving.

    The objective (lower is better) is averaged over consecutive windows of
    ``window`` steps. A window that fails to beat the best average by more
    than ``min_delta`` counts towards ``patience``; reaching it drops the rate.
    """

    def __init__(self, lr: float, factor: float = 0.9, patience: int = 1,
                 window: int = 100, min_delta: float = 1e-4, min_lr: float = 0.0):
        if not 0 < factor < 1:
            raise ValueError("plateau factor must lie in (0, 1)")
        if lr <= 0 or window < 1 or patience < 1:
            raise ValueError("lr must be positive and window, patience at least 1")
        self.lr = float(lr)
        self.factor = factor
        self.patience = patience
        self.window = window
        self.min_delta = min_delta
        self.min_lr = min_lr
        self.best = np.inf
        self.bad_windows = 0
        self._buffer: deque = deque(maxlen=window)
        self.history = [self.lr]

    def update(self, value: float) -> float:
        self._buffer.append(float(value))
        if len(self._buffer) == self.window:
            avg = float(np.mean(self._buffer))
            self._buffer.clear()
            if avg < self.best - self.min_delta:
                self.best = avg
                self.bad_windows = 0
            else:
                self.bad_windows += 1
                if self.bad_windows >= self.patience:
                    self.lr = max(self.lr * self.factor, self.min_lr)
                    self.bad_windows = 0
        self.history.append(self.lr)
        return self.lr
