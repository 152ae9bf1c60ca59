"""Zonal kernels on S^{d-1} with a homogeneous radial extension to R^d.

Inputs in R^{d-1} are rescaled per dimension, augmented with a bias
coordinate and normalised onto the sphere; the norm before normalisation is
kept as the radius. A kernel value is
``amplitude * radius_a * radius_b * s(unit_a . unit_b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from .specfun import SphereDim, gegenbauer_series
from .spectra import ShapeFunction, ZonalSpectrum, kernel_spectrum

JITTER = 1e-8


class EmbeddedInput(NamedTuple):
    """Points on the sphere plus their radii. ``unit`` is (N, d), ``radius`` (N,)."""

    unit: jax.Array
    radius: jax.Array

    @property
    def num_points(self) -> int:
        return self.unit.shape[0]


@dataclass(frozen=True)
class ZonalKernel:
    """Zonal kernel with trainable amplitude, input scales and bias.

    Positive quantities are stored as logs; the bias keeps a fixed sign.
    """

    shape: ShapeFunction
    dim: int
    log_amplitude: jax.Array
    log_scales: jax.Array
    log_bias: jax.Array
    bias_sign: float = 1.0

    @classmethod
    def create(cls, shape: ShapeFunction, dim: int, amplitude: float = 1.0,
               input_scales=None, bias: float = 1.0) -> "ZonalKernel":
        SphereDim(dim)
        if not shape.is_kernel:
            raise ValueError(f"{shape.kind.value} is not a kernel shape")
        if amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if bias == 0:
            raise ValueError("bias must be non-zero so every input has positive radius")
        scales = np.ones(dim - 1) if input_scales is None else np.asarray(input_scales, dtype=float)
        if scales.shape != (dim - 1,) or np.any(scales <= 0):
            raise ValueError(f"input_scales must be {dim - 1} positive numbers")
        return cls(shape, int(dim), jnp.log(jnp.asarray(amplitude, dtype=float)),
                   jnp.log(jnp.asarray(scales)), jnp.log(jnp.abs(jnp.asarray(bias, dtype=float))),
                   float(np.sign(bias)))

    @property
    def sphere(self) -> SphereDim:
        return SphereDim(self.dim)

    @property
    def alpha(self) -> float:
        return (self.dim - 2) / 2.0

    @property
    def amplitude(self):
        return jnp.exp(self.log_amplitude)

    @property
    def input_scales(self):
        return jnp.exp(self.log_scales)

    @property
    def bias(self):
        return self.bias_sign * jnp.exp(self.log_bias)

    def spectrum(self, truncation: int) -> ZonalSpectrum:
        return kernel_spectrum(self.shape, self.dim, truncation)

    def with_params(self, **kwargs) -> "ZonalKernel":
        return replace(self, **kwargs)


jax.tree_util.register_dataclass(
    ZonalKernel,
    data_fields=["log_amplitude", "log_scales", "log_bias"],
    meta_fields=["shape", "dim", "bias_sign"],
)


def embed(x, kernel: ZonalKernel) -> EmbeddedInput:
    """Rescale, append the bias coordinate and project onto the unit sphere.

    Accepts a single point of shape (d-1,) or a batch (N, d-1).
    """
    return lift(x, kernel.input_scales, kernel.bias)


def lift(x, scales, bias) -> EmbeddedInput:
    """Embedding for explicit per-dimension ``scales`` and a scalar ``bias``."""
    x = jnp.asarray(x, dtype=float)
    single = x.ndim == 1
    x = jnp.atleast_2d(x)
    if x.shape[1] != scales.shape[0]:
        raise ValueError(f"expected inputs of dimension {scales.shape[0]}, got {x.shape[1]}")
    scaled = x * scales
    bias = jnp.broadcast_to(bias, (x.shape[0], 1))
    full = jnp.concatenate([scaled, bias], axis=1)
    radius = jnp.sqrt(jnp.sum(full * full, axis=1))
    unit = full / radius[:, None]
    if single:
        return EmbeddedInput(unit[0], radius[0])
    return EmbeddedInput(unit, radius)


def _cosines(a: EmbeddedInput, b: EmbeddedInput):
    return jnp.clip(jnp.atleast_2d(a.unit) @ jnp.atleast_2d(b.unit).T, -1.0, 1.0)


def kernel_eval(kernel: ZonalKernel, a: EmbeddedInput, b: EmbeddedInput):
    """k(a, b) for two single embedded points."""
    t = jnp.clip(jnp.dot(a.unit, b.unit), -1.0, 1.0)
    return kernel.amplitude * a.radius * b.radius * kernel.shape(t)


def kernel_matrix(kernel: ZonalKernel, A: EmbeddedInput, B: EmbeddedInput | None = None):
    """Gram matrix K[i, j] = k(A_i, B_j); B defaults to A."""
    B = A if B is None else B
    s = kernel.shape(_cosines(A, B))
    return kernel.amplitude * jnp.atleast_1d(A.radius)[:, None] * jnp.atleast_1d(B.radius)[None, :] * s


def kernel_diag(kernel: ZonalKernel, A: EmbeddedInput):
    """k(x, x) = amplitude * radius^2 * s(1), without forming the Gram matrix."""
    s_one = kernel.shape(jnp.asarray(1.0))
    return kernel.amplitude * jnp.atleast_1d(A.radius) ** 2 * s_one


def mercer_eval(kernel: ZonalKernel, a: EmbeddedInput, b: EmbeddedInput, truncation: int):
    """Kernel value from the truncated Gegenbauer (Mercer) expansion.

    Works for single points or batches; batches return the full matrix.
    """
    weights = kernel.spectrum(truncation).addition_weights()
    if jnp.ndim(a.unit) == 1 and jnp.ndim(b.unit) == 1:
        t = jnp.clip(jnp.dot(a.unit, b.unit), -1.0, 1.0)
        return kernel.amplitude * a.radius * b.radius * gegenbauer_series(weights, kernel.alpha, t)
    t = _cosines(a, b)
    radial = jnp.atleast_1d(a.radius)[:, None] * jnp.atleast_1d(b.radius)[None, :]
    return kernel.amplitude * radial * gegenbauer_series(weights, kernel.alpha, t)
