"""Deep GP built from SVGP layers, with doubly-stochastic ELBO estimation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.stats import norm

from ..inducing import ActivatedInducing, PseudoPointInducing, activation_features
from ..kernels import ZonalKernel, embed
from ..svgp import (
    LOG_2PI,
    GaussianVariational,
    WeightSpaceVariational,
    PosteriorMarginals,
    cuu_cholesky,
    kl_to_prior,
    posterior_mean_weights,
    predict,
)

GH_NODES, GH_WEIGHTS = np.polynomial.hermite.hermgauss(20)


@dataclass(frozen=True)
class GaussianLikelihood:
    log_noise: jax.Array

    @classmethod
    def create(cls, noise_var: float = 0.1):
        if noise_var <= 0:
            raise ValueError("noise variance must be positive")
        return cls(jnp.log(jnp.asarray(noise_var, dtype=float)))

    @property
    def noise_var(self):
        return jnp.exp(self.log_noise)

    def expected_log_density(self, y, mean, var):
        """E_{N(f | mean, var)} log N(y | f, noise), elementwise."""
        s2 = self.noise_var
        return -0.5 * (LOG_2PI + jnp.log(s2)) - 0.5 * ((y - mean) ** 2 + var) / s2

    def log_predictive_density(self, y, mean, var):
        s2 = var + self.noise_var
        return -0.5 * (LOG_2PI + jnp.log(s2)) - 0.5 * (y - mean) ** 2 / s2


@dataclass(frozen=True)
class BernoulliProbit:
    """p(y = 1 | f) = Phi(f); labels are 0/1."""

    def expected_log_density(self, y, mean, var):
        f = mean[..., None] + jnp.sqrt(2.0 * var)[..., None] * GH_NODES
        sign = (2.0 * y - 1.0)[..., None]
        return jnp.sum(norm.logcdf(sign * f) * GH_WEIGHTS, axis=-1) / math.sqrt(math.pi)

    def predict_proba(self, mean, var):
        return norm.cdf(mean / jnp.sqrt(1.0 + var))

    def log_predictive_density(self, y, mean, var):
        p = self.predict_proba(mean, var)
        return jnp.where(y > 0.5, jnp.log(p), jnp.log1p(-p))


jax.tree_util.register_dataclass(GaussianLikelihood, data_fields=["log_noise"], meta_fields=[])
jax.tree_util.register_dataclass(BernoulliProbit, data_fields=[], meta_fields=[])


@dataclass(frozen=True)
class GPLayer:
    """One multi-output GP layer: kernel, inducing variables, q(u) and a constant mean."""

    kernel: ZonalKernel
    inducing: ActivatedInducing | PseudoPointInducing
    q: GaussianVariational
    mean_const: jax.Array
    use_mean: bool = True

    @property
    def input_dim(self) -> int:
        return self.kernel.dim - 1

    @property
    def output_dim(self) -> int:
        return self.q.num_outputs

    @property
    def num_inducing(self) -> int:
        return self.q.num_inducing

    @property
    def offset(self):
        return self.mean_const if self.use_mean else jnp.zeros_like(self.mean_const)

    def validate(self):
        if self.inducing.dim != self.kernel.dim:
            raise ValueError("inducing dimension differs from kernel sphere dimension")
        if self.q.num_inducing != self.inducing.num_inducing:
            raise ValueError("q(u) size differs from number of inducing variables")
        if self.mean_const.shape != (self.output_dim,):
            raise ValueError("mean_const must have one entry per output")


jax.tree_util.register_dataclass(
    GPLayer, data_fields=["kernel", "inducing", "q", "mean_const"], meta_fields=["use_mean"]
)


@dataclass(frozen=True)
class DeepGPModel:
    layers: tuple
    likelihood: GaussianLikelihood | BernoulliProbit

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    def validate(self) -> "DeepGPModel":
        if not self.layers:
            raise ValueError("a deep GP needs at least one layer")
        for layer in self.layers:
            layer.validate()
        for below, above in zip(self.layers[:-1], self.layers[1:]):
            if below.output_dim != above.input_dim:
                raise ValueError(
                    f"layer output dimension {below.output_dim} does not feed input dimension {above.input_dim}"
                )
        if isinstance(self.likelihood, GaussianLikelihood) and not float(self.likelihood.noise_var) > 0:
            raise ValueError("Gaussian noise variance must be positive")
        return self

    def replace_layer(self, index: int, layer: GPLayer) -> "DeepGPModel":
        layers = list(self.layers)
        layers[index] = layer
        return replace(self, layers=tuple(layers))


jax.tree_util.register_dataclass(DeepGPModel, data_fields=["layers", "likelihood"], meta_fields=[])


def to_weight_space(model: DeepGPModel) -> DeepGPModel:
    """Same model with each q(u) held as a ``WeightSpaceVariational``."""
    layers = []
    for layer in model.layers:
        L = cuu_cholesky(layer.inducing, layer.kernel)
        layers.append(replace(layer, q=WeightSpaceVariational.from_gaussian(layer.q, L)))
    return replace(model, layers=tuple(layers))


def from_weight_space(model: DeepGPModel) -> DeepGPModel:
    layers = []
    for layer in model.layers:
        L = cuu_cholesky(layer.inducing, layer.kernel)
        layers.append(replace(layer, q=layer.q.to_gaussian(L)))
    return replace(model, layers=tuple(layers))


# -- forward passes ---------------------------------------------------------


def layer_output_weights(layer: GPLayer, chol_uu=None):
    """amplitude * C_uu^{-1} mu: the (M, P) weights multiplying r * g~(w . x)."""
    B = posterior_mean_weights(layer.inducing, layer.kernel, layer.q, chol_uu)
    return layer.kernel.amplitude * B


def layer_mean(layer: GPLayer, H, chol_uu=None):
    """Posterior mean of one layer at inputs H (N, d-1)."""
    X = embed(H, layer.kernel)
    if isinstance(layer.inducing, ActivatedInducing):
        feats = activation_features(layer.inducing, X)
        return feats.T @ layer_output_weights(layer, chol_uu) + layer.offset
    return predict(layer.inducing, layer.kernel, layer.q, X, chol_uu).mean + layer.offset


def layer_marginals(layer: GPLayer, H, chol_uu=None) -> PosteriorMarginals:
    X = embed(H, layer.kernel)
    mean, var = predict(layer.inducing, layer.kernel, layer.q, X, chol_uu)
    return PosteriorMarginals(mean + layer.offset, var)


def mean_forward(model: DeepGPModel, X):
    """Deterministic composition of layer posterior means."""
    H = jnp.asarray(X, dtype=float)
    for layer in model.layers:
        H = layer_mean(layer, H)
    return H


def _chols(model: DeepGPModel):
    return [cuu_cholesky(layer.inducing, layer.kernel) for layer in model.layers]


def propagate(model: DeepGPModel, X, key, num_samples: int = 1, chols=None):
    """Final-layer marginals after sampling through the hidden layers.

    Returns mean and variance of shape (S, N, P). Hidden layers draw
    h = mean + sqrt(var) * eps independently per point and output.
    """
    chols = _chols(model) if chols is None else chols
    H = jnp.asarray(X, dtype=float)
    N = H.shape[0]
    if model.depth == 1:
        mean, var = layer_marginals(model.layers[0], H, chols[0])
        return mean[None], var[None]
    H = jnp.tile(H, (num_samples, 1))
    for layer, L in zip(model.layers[:-1], chols[:-1]):
        key, sub = jax.random.split(key)
        mean, var = layer_marginals(layer, H, L)
        H = mean + jnp.sqrt(var) * jax.random.normal(sub, mean.shape)
    mean, var = layer_marginals(model.layers[-1], H, chols[-1])
    P = mean.shape[1]
    return mean.reshape(num_samples, N, P), var.reshape(num_samples, N, P)


def sample_forward(model: DeepGPModel, X, key):
    """One joint draw of the network output, sampling every layer marginally."""
    H = jnp.asarray(X, dtype=float)
    for layer in model.layers:
        key, sub = jax.random.split(key)
        mean, var = layer_marginals(layer, H)
        H = mean + jnp.sqrt(var) * jax.random.normal(sub, mean.shape)
    return H


def total_kl(model: DeepGPModel, chols=None):
    chols = _chols(model) if chols is None else chols
    return sum(kl_to_prior(layer.q, chol_uu=L) for layer, L in zip(model.layers, chols))


def _as_targets(y, P):
    y = jnp.asarray(y, dtype=float)
    return y.reshape(-1, P)


def elbo(model: DeepGPModel, X, y, key, num_samples: int = 1, num_data: int | None = None):
    """Doubly-stochastic ELBO estimate from the minibatch (X, y).

    The data term is rescaled by num_data / batch size. At the last layer the
    expectation over f is exact (Gaussian) or Gauss-Hermite (probit).
    """
    chols = _chols(model)
    mean, var = propagate(model, X, key, num_samples, chols)
    y = _as_targets(y, mean.shape[-1])
    ell = model.likelihood.expected_log_density(y[None], mean, var)
    batch = y.shape[0]
    scale = (num_data or batch) / batch
    data_term = scale * jnp.sum(ell) / mean.shape[0]
    return data_term - total_kl(model, chols)


def predictive_log_density(model: DeepGPModel, X, y, key, num_samples: int = 20):
    """Per-point log of the Monte-Carlo averaged predictive density."""
    mean, var = propagate(model, X, key, num_samples)
    y = _as_targets(y, mean.shape[-1])
    logp = jnp.sum(model.likelihood.log_predictive_density(y[None], mean, var), axis=-1)
    return jax.scipy.special.logsumexp(logp, axis=0) - math.log(mean.shape[0])


def predict_mean(model: DeepGPModel, X, key, num_samples: int = 20):
    """Monte-Carlo predictive mean of f_L (N, P)."""
    mean, _ = propagate(model, X, key, num_samples)
    return jnp.mean(mean, axis=0)


def predict_proba(model: DeepGPModel, X, key, num_samples: int = 20):
    """p(y = 1 | x) for a probit model, averaged over hidden-layer samples."""
    mean, var = propagate(model, X, key, num_samples)
    return jnp.mean(model.likelihood.predict_proba(mean, var), axis=0)[:, 0]
