"""Constructors for deep GP models with fresh variational state."""
from __future__ import annotations

import jax.numpy as jnp
import numpy as np

from ..inducing import ActivatedInducing, PseudoPointInducing, random_directions
from ..kernels import ZonalKernel, embed
from ..spectra import ShapeFunction
from ..svgp import GaussianVariational, cuu_cholesky
from .model import BernoulliProbit, DeepGPModel, GaussianLikelihood, GPLayer

HIDDEN_COV_SCALE = 1e-5


def make_likelihood(name: str, noise_var: float = 0.1):
    if name == "gaussian":
        return GaussianLikelihood.create(noise_var)
    if name == "probit":
        return BernoulliProbit()
    raise ValueError(f"unknown likelihood {name!r}; expected 'gaussian' or 'probit'")


def _prior_q(ind, kernel, num_outputs, cov_scale):
    L = cuu_cholesky(ind, kernel) * jnp.sqrt(cov_scale)
    M = L.shape[0]
    return GaussianVariational(jnp.zeros((M, num_outputs)), jnp.broadcast_to(L, (num_outputs, M, M)))


def build_deep_gp(
    rng: np.random.Generator,
    input_dim: int,
    widths,
    output_dims,
    *,
    inducing: str = "activated",
    kernel_shape: ShapeFunction | None = None,
    activation: ShapeFunction | None = None,
    truncation: int = 10,
    likelihood: str = "gaussian",
    noise_var: float = 0.1,
    amplitude: float = 1.0,
    bias: float = 1.0,
    hidden_mean: bool = True,
    hidden_cov_scale: float = HIDDEN_COV_SCALE,
    X=None,
) -> DeepGPModel:
    """Stack of layers with widths[l] inducing variables and output_dims[l] outputs.

    q(u) starts at mean zero with covariance C_uu on the last layer and
    ``hidden_cov_scale * C_uu`` on hidden layers, which keeps hidden samples
    close to the mean early in training. Pseudo-point layers place the first
    layer's points on a random subset of ``X`` when it is given.
    """
    kernel_shape = kernel_shape or ShapeFunction.arccosine()
    activation = activation or ShapeFunction.relu()
    if len(widths) != len(output_dims):
        raise ValueError("need one width per output dimension")
    if inducing not in ("activated", "pseudo"):
        raise ValueError(f"unknown inducing family {inducing!r}")
    layers, d_in = [], input_dim
    depth = len(widths)
    for i, (M, P) in enumerate(zip(widths, output_dims)):
        dim = d_in + 1
        kernel = ZonalKernel.create(kernel_shape, dim, amplitude=amplitude, bias=bias)
        if inducing == "activated":
            ind = ActivatedInducing.create(random_directions(rng, M, dim), activation, kernel, truncation)
        elif i == 0 and X is not None and len(X) >= M:
            rows = rng.choice(len(X), size=M, replace=False)
            ind = PseudoPointInducing.create(np.asarray(embed(np.asarray(X)[rows], kernel).unit))
        else:
            ind = PseudoPointInducing.create(random_directions(rng, M, dim))
        last = i == depth - 1
        q = _prior_q(ind, kernel, P, 1.0 if last else hidden_cov_scale)
        layers.append(GPLayer(kernel, ind, q, jnp.zeros(P), True if last else hidden_mean))
        d_in = P
    return DeepGPModel(tuple(layers), make_likelihood(likelihood, noise_var)).validate()
