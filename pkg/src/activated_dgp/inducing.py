"""Inducing-variable families and their covariances.

``ActivatedInducing`` projects the GP onto truncated ridge activations
g_m(x) = sigma(w_m^T x) in the RKHS of a zonal kernel, so the basis functions
of the sparse posterior are activation units. ``PseudoPointInducing`` is the
usual u_m = f(w_m) baseline.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .kernels import JITTER, EmbeddedInput, ZonalKernel, kernel_diag, kernel_matrix
from .linalg import robust_cholesky, tri_solve
from .specfun import SphereDim, gegenbauer_series
from .spectra import ShapeFunction, ZonalSpectrum, activation_spectrum, kernel_spectrum

DEFAULT_TRUNCATION = 10


class SpectralMismatchError(ValueError):
    """An activation level is active where the kernel has a zero eigenvalue."""


def _normalise_rows(raw):
    return raw / jnp.sqrt(jnp.sum(raw * raw, axis=1, keepdims=True))


def random_directions(rng: np.random.Generator, num: int, dim: int) -> np.ndarray:
    """Rows uniform on S^{dim-1}."""
    w = rng.standard_normal((num, dim))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


@dataclass(frozen=True)
class ActivatedInducing:
    """M activated inducing variables with directions derived from ``raw``.

    ``raw`` is unconstrained; every evaluation normalises its rows, so
    gradients flow through the projection onto the sphere.
    """

    raw: jax.Array
    activation: ShapeFunction
    kernel_shape: ShapeFunction
    dim: int
    truncation: int = DEFAULT_TRUNCATION
    allow_mismatch: bool = False

    @classmethod
    def create(cls, directions, activation: ShapeFunction, kernel,
               truncation: int = DEFAULT_TRUNCATION, allow_mismatch: bool = False):
        kernel_shape = kernel.shape if isinstance(kernel, ZonalKernel) else kernel
        directions = np.asarray(directions, dtype=float)
        if directions.ndim != 2:
            raise ValueError("directions must be an (M, d) array")
        dim = directions.shape[1]
        if isinstance(kernel, ZonalKernel) and kernel.dim != dim:
            raise ValueError(f"directions live in R^{dim} but the kernel is on S^{kernel.dim - 1}")
        if directions.shape[0] and np.any(np.linalg.norm(directions, axis=1) == 0):
            raise ValueError("directions must be non-zero")
        ind = cls(jnp.asarray(directions), activation, kernel_shape, dim, int(truncation), bool(allow_mismatch))
        ind.check_alignment()
        return ind

    @property
    def sphere(self) -> SphereDim:
        return SphereDim(self.dim)

    @property
    def num_inducing(self) -> int:
        return self.raw.shape[0]

    @property
    def directions(self):
        if self.raw.shape[0] == 0:
            return self.raw
        return _normalise_rows(self.raw)

    @property
    def act_spectrum(self) -> ZonalSpectrum:
        return activation_spectrum(self.activation, self.dim, self.truncation)

    @property
    def ker_spectrum(self) -> ZonalSpectrum:
        return kernel_spectrum(self.kernel_shape, self.dim, self.truncation)

    def check_alignment(self):
        sig, lam = self.act_spectrum.values, self.ker_spectrum.values
        bad = [n for n in range(self.truncation + 1) if sig[n] != 0.0 and lam[n] == 0.0]
        if bad and not self.allow_mismatch:
            raise SpectralMismatchError(
                f"activation has non-zero coefficients at degrees {bad} where the kernel "
                "eigenvalue is zero; C_uu would be unbounded"
            )

    def cuu_weights(self) -> tuple:
        """sigma_n^2 / lambda_n * (n + alpha)/alpha, skipping levels with lambda_n == 0."""
        sig, lam = self.act_spectrum.values, self.ker_spectrum.values
        a = self.sphere.alpha
        return tuple(
            float(s * s / l * (n + a) / a) if l != 0.0 else 0.0
            for n, (s, l) in enumerate(zip(sig, lam))
        )


jax.tree_util.register_dataclass(
    ActivatedInducing,
    data_fields=["raw"],
    meta_fields=["activation", "kernel_shape", "dim", "truncation", "allow_mismatch"],
)


@dataclass(frozen=True)
class PseudoPointInducing:
    """Pseudo inputs on the unit sphere; ``points`` normalises ``raw``."""

    raw: jax.Array

    @classmethod
    def create(cls, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2:
            raise ValueError("points must be an (M, d) array")
        return cls(jnp.asarray(points))

    @property
    def num_inducing(self) -> int:
        return self.raw.shape[0]

    @property
    def dim(self) -> int:
        return self.raw.shape[1]

    @property
    def points(self):
        if self.raw.shape[0] == 0:
            return self.raw
        return _normalise_rows(self.raw)

    def as_embedded(self) -> EmbeddedInput:
        return EmbeddedInput(self.points, jnp.ones(self.raw.shape[0]))


jax.tree_util.register_dataclass(PseudoPointInducing, data_fields=["raw"], meta_fields=[])


def truncated_activation(ind, t):
    """g~(t) = sum_{n <= N} sigma_n (n + alpha)/alpha C_n^{(alpha)}(t).

    ``ind`` may be an ``ActivatedInducing`` or an activation ``ZonalSpectrum``.
    """
    spectrum = ind.act_spectrum if isinstance(ind, ActivatedInducing) else ind
    t = jnp.clip(jnp.asarray(t, dtype=float), -1.0, 1.0)
    return gegenbauer_series(spectrum.addition_weights(), spectrum.sphere.alpha, t)


def ridge_features(directions, spectrum: ZonalSpectrum, X: EmbeddedInput, radial: bool = True):
    """radius_i * g~(w_m . unit_i) as an (M, N) matrix; no radius when ``radial`` is off."""
    t = jnp.clip(directions @ jnp.atleast_2d(X.unit).T, -1.0, 1.0)
    g = truncated_activation(spectrum, t)
    return jnp.atleast_1d(X.radius)[None, :] * g if radial else g


def activation_features(ind: ActivatedInducing, X: EmbeddedInput):
    """radius_i * g~(w_m . unit_i) as an (M, N) matrix, without the amplitude."""
    return ridge_features(ind.directions, ind.act_spectrum, X)


def cuf(ind, kernel: ZonalKernel, X: EmbeddedInput):
    """Cov(u_m, f(x_i)) as an (M, N) matrix."""
    if isinstance(ind, PseudoPointInducing):
        return cuf_pseudo(ind, kernel, X)
    return kernel.amplitude * activation_features(ind, X)


def cuu(ind, kernel: ZonalKernel, jitter: float = JITTER):
    """Cov(u_m, u_m') with ``jitter * amplitude`` on the diagonal."""
    if isinstance(ind, PseudoPointInducing):
        return cuu_pseudo(ind, kernel, jitter)
    W = ind.directions
    t = jnp.clip(W @ W.T, -1.0, 1.0)
    C = kernel.amplitude * gegenbauer_series(ind.cuu_weights(), ind.sphere.alpha, t)
    return C + jitter * kernel.amplitude * jnp.eye(W.shape[0])


def cuf_pseudo(ind: PseudoPointInducing, kernel: ZonalKernel, X: EmbeddedInput):
    return kernel_matrix(kernel, ind.as_embedded(), X)


def cuu_pseudo(ind: PseudoPointInducing, kernel: ZonalKernel, jitter: float = JITTER):
    Z = ind.as_embedded()
    return kernel_matrix(kernel, Z) + jitter * kernel.amplitude * jnp.eye(ind.num_inducing)


def nystrom_residual(ind, kernel: ZonalKernel, X: EmbeddedInput):
    """diag(K_ff) - diag(Q_ff), floored at zero.

    Entries below -1e-8 (relative to the largest prior variance) indicate a
    broken Nystrom approximation and trigger a warning before flooring.
    """
    kdiag = kernel_diag(kernel, X)
    if ind.num_inducing == 0:
        return kdiag
    L = robust_cholesky(cuu(ind, kernel), kernel.amplitude)
    A = tri_solve(L, cuf(ind, kernel, X))
    resid = kdiag - jnp.sum(A * A, axis=0)
    if not isinstance(resid, jax.core.Tracer):
        floor = -1e-8 * max(1.0, float(jnp.max(kdiag)))
        if float(jnp.min(resid)) < floor:
            warnings.warn(f"Nystrom residual {float(jnp.min(resid)):.3e} below tolerance", RuntimeWarning)
    return jnp.maximum(resid, 0.0)
