"""Two-stage training: fit the network, import it, then maximise the ELBO."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import jax
import jax.numpy as jnp
from jax.scipy.stats import norm

from ..linalg import NumericalError
from .model import DeepGPModel, elbo, from_weight_space, to_weight_space
from .network import DenseNet
from .optim import PlateauSchedule, adam_init, adam_step

log = logging.getLogger(__name__)

LOSSES = ("mse", "bce")


@dataclass(frozen=True)
class TrainConfig:
    stage: str = "elbo"
    minibatch: int = 1024
    lr: float = 0.01
    plateau_factor: float = 0.9
    plateau_patience: int = 1
    plateau_window: int = 100
    plateau_min_delta: float = 1e-4
    samples_per_point: int = 1
    max_steps: int = 1000
    seed: int = 0
    log_every: int = 0
    eval_every: int = 0
    train_kernel: bool = True
    train_mean: bool = True

    def __post_init__(self):
        if self.stage not in ("nn", "elbo"):
            raise ValueError(f"stage must be 'nn' or 'elbo', got {self.stage!r}")
        if self.minibatch < 1 or self.samples_per_point < 1 or self.max_steps < 0:
            raise ValueError("minibatch and samples_per_point must be >= 1, max_steps >= 0")
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "TrainConfig":
        known = {k: v for k, v in {**data, **overrides}.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def stage1_loss(net: DenseNet, X, y, loss: str):
    """Mean squared error, or probit cross-entropy on 0/1 labels."""
    out = net.forward(X)
    y = jnp.reshape(y, out.shape)
    if loss == "mse":
        return jnp.mean((out - y) ** 2)
    if loss == "bce":
        return -jnp.mean(y * norm.logcdf(out) + (1.0 - y) * norm.logcdf(-out))
    raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _dense_mask(net: DenseNet):
    """Train directions, output weights and mean; keep input scales and bias fixed."""
    layers = tuple(
        replace(layer, raw_in=1.0, weight_out=1.0, mean_const=1.0, log_scales=0.0, log_bias=0.0)
        for layer in net.layers
    )
    return DenseNet(layers)


def _optimise(params, objective, mask, X, y, config: TrainConfig, key, trace, report,
              callback=None, decode=lambda p: p):
    X = jnp.asarray(X, dtype=float)
    y = jnp.asarray(y, dtype=float)
    N = X.shape[0]
    batch = min(config.minibatch, N)

    def step(params, state, key, lr):
        kb, ks = jax.random.split(key)
        if batch < N:
            idx = jax.random.choice(kb, N, (batch,), replace=False)
            xb, yb = X[idx], y[idx]
        else:
            xb, yb = X, y
        value, grads = jax.value_and_grad(objective)(params, xb, yb, ks)
        grads = jax.tree_util.tree_map(lambda g, m: g * m, grads, mask)
        params, state = adam_step(params, grads, state, lr)
        return params, state, value

    step = jax.jit(step)
    state = adam_init(params)
    schedule = PlateauSchedule(config.lr, config.plateau_factor, config.plateau_patience,
                               config.plateau_window, config.plateau_min_delta)
    for i in range(config.max_steps):
        key, sub = jax.random.split(key)
        new_params, new_state, value = step(params, state, sub, schedule.lr)
        value = float(value)
        if not jnp.isfinite(value):
            raise NumericalError(f"objective became non-finite at step {i}")
        if trace is not None:
            trace.append((i, report(value), schedule.lr))
        if config.log_every and i % config.log_every == 0:
            log.info("step %d objective %.6g lr %.3g", i, report(value), schedule.lr)
        params, state = new_params, new_state
        schedule.update(value)
        if callback is not None and config.eval_every and (i + 1) % config.eval_every == 0:
            callback(i + 1, decode(params))
    return params


def train_stage1(net: DenseNet, X, y, loss: str, config: TrainConfig, key=None, trace=None,
                 callback=None) -> DenseNet:
    """Adam on the network loss; ``trace`` collects (step, loss, lr).

    ``callback(step, net)`` runs every ``config.eval_every`` steps.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    key = jax.random.PRNGKey(config.seed) if key is None else key

    def objective(params, xb, yb, _):
        return stage1_loss(params, xb, yb, loss)

    return _optimise(net, objective, _dense_mask(net), X, y, config, key, trace, lambda v: v, callback)


def _scale_weights(model: DeepGPModel, power: float) -> DeepGPModel:
    layers = tuple(replace(layer, q=replace(layer.q, weights=layer.q.weights * layer.kernel.amplitude**power))
                   for layer in model.layers)
    return replace(model, layers=layers)


def to_network_space(model: DeepGPModel) -> DeepGPModel:
    """Weight-space q(u) whose weights are the network's output weights A * B."""
    return _scale_weights(to_weight_space(model), 1.0)


def from_network_space(model: DeepGPModel) -> DeepGPModel:
    return from_weight_space(_scale_weights(model, -1.0))


def train_stage2(model: DeepGPModel, X, y, config: TrainConfig, key=None, trace=None,
                 callback=None) -> DeepGPModel:
    """Adam on -ELBO / N; ``trace`` collects (step, ELBO, lr).

    With ``train_mean`` the variational parameters are optimised in weight
    space (B and a whitened Cholesky factor) and converted back to (mu, Sigma)
    at the end. Without it every parameter the exported network reads (output
    weights A*B, directions, input scales, bias and mean constants) stays where
    stage 1 put it and only Sigma, the kernel amplitudes and the likelihood
    move, so the posterior mean is exactly the imported network.
    """
    key = jax.random.PRNGKey(config.seed) if key is None else key
    N = len(X)
    S = config.samples_per_point

    if config.train_mean:
        encode, decode = to_weight_space, from_weight_space
    else:
        encode, decode = to_network_space, from_network_space

    def objective(params, xb, yb, k):
        return -elbo(decode(params), xb, yb, k, S, N) / N

    start = encode(model)
    mask = jax.tree_util.tree_map(lambda _: 1.0, start)
    layers = []
    for layer in mask.layers:
        if not config.train_kernel:
            layer = replace(layer, kernel=jax.tree_util.tree_map(lambda _: 0.0, layer.kernel))
        if not config.train_mean:
            # everything the exported network reads stays fixed
            kernel = replace(layer.kernel, log_scales=0.0 * layer.kernel.log_scales,
                             log_bias=0.0 * layer.kernel.log_bias)
            layer = replace(layer, kernel=kernel, mean_const=0.0 * layer.mean_const,
                            q=replace(layer.q, weights=0.0 * layer.q.weights),
                            inducing=jax.tree_util.tree_map(lambda _: 0.0, layer.inducing))
        layers.append(layer)
    mask = replace(mask, layers=tuple(layers))
    fitted = _optimise(start, objective, mask, X, y, config, key, trace, lambda v: -v * N,
                       callback, decode)
    return decode(fitted)
