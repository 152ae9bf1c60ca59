"""Sparse variational GP layer in the original (unwhitened) inducing basis.

q(u_p) = N(mu_p, Sigma_p) per output p, with all outputs sharing the
inducing features. The posterior is

    mean_p(x) = c_u(x)^T C_uu^{-1} mu_p
    var_p(x)  = k(x, x) + c_u(x)^T C_uu^{-1} (Sigma_p - C_uu) C_uu^{-1} c_u(x)

and everything is computed with triangular solves against chol(C_uu).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from .inducing import cuf, cuu
from .kernels import EmbeddedInput, ZonalKernel, kernel_diag, kernel_matrix
from .linalg import cho_solve, robust_cholesky, tri_solve

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianVariational:
    """``means`` is (M, P); ``chol`` holds P lower-triangular (M, M) factors."""

    means: jax.Array
    chol: jax.Array

    @classmethod
    def from_covariance(cls, means, cov, num_outputs: int | None = None):
        means = jnp.asarray(means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        P = num_outputs or means.shape[1]
        L = robust_cholesky(jnp.asarray(cov), 1.0)
        return cls(means, jnp.broadcast_to(L, (P,) + L.shape))

    @classmethod
    def prior(cls, Cuu, num_outputs: int = 1, scale: float = 1.0):
        M = Cuu.shape[0]
        return cls.from_covariance(jnp.zeros((M, num_outputs)), scale * Cuu, num_outputs)

    @property
    def num_inducing(self) -> int:
        return self.means.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.means.shape[1]

    @property
    def chol_factors(self):
        return jnp.tril(self.chol)

    @property
    def covariances(self):
        L = self.chol_factors
        return L @ jnp.swapaxes(L, -1, -2)

    def canonical(self) -> "GaussianVariational":
        """Flip column signs so every Cholesky diagonal is positive."""
        L = self.chol_factors
        signs = jnp.where(jnp.diagonal(L, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
        return GaussianVariational(self.means, L * signs[:, None, :])


jax.tree_util.register_dataclass(GaussianVariational, data_fields=["means", "chol"], meta_fields=[])


@dataclass(frozen=True)
class WeightSpaceVariational:
    """q(u) written as B = C_uu^{-1} mu and T with Sigma = L T T^T L^T (C_uu = L L^T).

    An optimisation coordinate system only: when C_uu is close to singular,
    small steps in mu move B by huge amounts, while steps in B do not.
    """

    weights: jax.Array
    white_chol: jax.Array

    @classmethod
    def from_gaussian(cls, q: GaussianVariational, chol_uu) -> "WeightSpaceVariational":
        B = cho_solve(chol_uu, q.means)
        T = jax.vmap(lambda Lp: tri_solve(chol_uu, Lp))(q.chol_factors)
        return cls(B, jnp.tril(T))

    def to_gaussian(self, chol_uu) -> GaussianVariational:
        means = chol_uu @ (chol_uu.T @ self.weights)
        return GaussianVariational(means, chol_uu[None] @ jnp.tril(self.white_chol))


jax.tree_util.register_dataclass(
    WeightSpaceVariational, data_fields=["weights", "white_chol"], meta_fields=[]
)


class PosteriorMarginals(NamedTuple):
    mean: jax.Array
    var: jax.Array


def cuu_cholesky(ind, kernel: ZonalKernel):
    return robust_cholesky(cuu(ind, kernel), kernel.amplitude)


def posterior_mean_weights(ind, kernel: ZonalKernel, q: GaussianVariational, chol_uu=None):
    """B = C_uu^{-1} [mu_1 .. mu_P], the (M, P) output weights of the layer."""
    if q.num_inducing == 0:
        return jnp.zeros_like(q.means)
    L = cuu_cholesky(ind, kernel) if chol_uu is None else chol_uu
    return cho_solve(L, q.means)


def _clamp_var(var):
    if not isinstance(var, jax.core.Tracer):
        worst = float(jnp.min(var)) if var.size else 0.0
        if worst < -1e-8:
            warnings.warn(f"negative predictive variance {worst:.3e} clamped to zero", RuntimeWarning)
    return jnp.maximum(var, 0.0)


def predict(ind, kernel: ZonalKernel, q: GaussianVariational, X: EmbeddedInput,
            chol_uu=None) -> PosteriorMarginals:
    """Marginal posterior mean and variance, each (N, P)."""
    kdiag = kernel_diag(kernel, X)
    P = q.num_outputs
    if q.num_inducing == 0:
        return PosteriorMarginals(jnp.zeros((kdiag.shape[0], P)), jnp.tile(kdiag[:, None], (1, P)))
    L = cuu_cholesky(ind, kernel) if chol_uu is None else chol_uu
    Kuf = cuf(ind, kernel, X)
    mean = Kuf.T @ cho_solve(L, q.means)
    A = tri_solve(L, Kuf)
    proj = tri_solve(L, A, trans=True)  # C_uu^{-1} K_uf
    S = jnp.einsum("pmk,mn->pkn", q.chol_factors, proj)
    var = kdiag[:, None] - jnp.sum(A * A, axis=0)[:, None] + jnp.sum(S * S, axis=1).T
    return PosteriorMarginals(mean, _clamp_var(var))


def variance_terms(ind, kernel: ZonalKernel, q: GaussianVariational, X: EmbeddedInput):
    """Split the predictive variance into (K_ff - Q_ff, diag of Q_fu Sigma Q_fu^T).

    Returns two (N, P) arrays; their sum equals ``predict(...).var``.
    """
    kdiag = kernel_diag(kernel, X)
    L = cuu_cholesky(ind, kernel)
    Kuf = cuf(ind, kernel, X)
    A = tri_solve(L, Kuf)
    proj = tri_solve(L, A, trans=True)
    S = jnp.einsum("pmk,mn->pkn", q.chol_factors, proj)
    resid = kdiag - jnp.sum(A * A, axis=0)
    return jnp.tile(resid[:, None], (1, q.num_outputs)), jnp.sum(S * S, axis=1).T


def kl_to_prior(q: GaussianVariational, Cuu=None, chol_uu=None):
    """sum_p KL(N(mu_p, Sigma_p) || N(0, C_uu))."""
    M, P = q.means.shape
    if M == 0:
        return jnp.asarray(0.0)
    L = robust_cholesky(Cuu, 1.0) if chol_uu is None else chol_uu
    Lq = q.chol_factors
    alpha = tri_solve(L, q.means)
    LinvLq = jax.vmap(lambda Lp: tri_solve(L, Lp))(Lq)
    logdet_prior = 2.0 * jnp.sum(jnp.log(jnp.diagonal(L)))
    logdet_q = 2.0 * jnp.sum(jnp.log(jnp.abs(jnp.diagonal(Lq, axis1=-2, axis2=-1))))
    return 0.5 * (jnp.sum(LinvLq**2) + jnp.sum(alpha**2) - M * P + P * logdet_prior - logdet_q)


def _as_columns(y):
    y = jnp.asarray(y, dtype=float)
    return y[:, None] if y.ndim == 1 else y


def titsias_optimal_q(ind, kernel: ZonalKernel, X: EmbeddedInput, y, noise_var) -> GaussianVariational:
    """Optimal q(u) for a Gaussian likelihood.

    Sigma* = C (C + s^-2 K_uf K_fu)^{-1} C and mu* = s^-2 Sigma* C^{-1} K_uf y.
    With C = L L^T and B = I + A A^T (A = L^{-1} K_uf / s), Sigma* = R R^T
    where R = L chol(B)^{-T}; a QR of R^T gives the lower Cholesky factor.
    """
    y = _as_columns(y)
    P = y.shape[1]
    L = cuu_cholesky(ind, kernel)
    M = L.shape[0]
    sigma = jnp.sqrt(noise_var)
    A = tri_solve(L, cuf(ind, kernel, X)) / sigma
    LB = jnp.linalg.cholesky(jnp.eye(M) + A @ A.T)
    R = tri_solve(LB, L.T).T  # L LB^{-T}
    means = R @ tri_solve(LB, A @ y) / sigma
    _, upper = jnp.linalg.qr(R.T)
    chol = upper.T
    chol = chol * jnp.where(jnp.diagonal(chol) < 0, -1.0, 1.0)[None, :]
    return GaussianVariational(means, jnp.broadcast_to(chol, (P, M, M)))


def collapsed_elbo(ind, kernel: ZonalKernel, X: EmbeddedInput, y, noise_var):
    """Collapsed bound log N(y | 0, Q_ff + s^2 I) - tr(K_ff - Q_ff) / (2 s^2).

    Summed over output columns of ``y``.
    """
    y = _as_columns(y)
    N, P = y.shape
    kdiag = kernel_diag(kernel, X)
    trace_k = jnp.sum(kdiag)
    const = -0.5 * N * P * (LOG_2PI + jnp.log(noise_var)) - 0.5 * jnp.sum(y * y) / noise_var
    if ind.num_inducing == 0:
        return const - 0.5 * P * trace_k / noise_var
    L = cuu_cholesky(ind, kernel)
    M = L.shape[0]
    sigma = jnp.sqrt(noise_var)
    A = tri_solve(L, cuf(ind, kernel, X)) / sigma
    LB = jnp.linalg.cholesky(jnp.eye(M) + A @ A.T)
    c = tri_solve(LB, A @ y) / sigma
    bound = const - P * jnp.sum(jnp.log(jnp.diagonal(LB))) + 0.5 * jnp.sum(c * c)
    return bound - 0.5 * P * (trace_k / noise_var - jnp.sum(A * A))


# -- dense GP regression, used as an oracle ----------------------------------


def gpr_log_marginal_likelihood(kernel: ZonalKernel, X: EmbeddedInput, y, noise_var):
    """Exact log N(y | 0, K + s^2 I), summed over output columns."""
    y = _as_columns(y)
    N, P = y.shape
    K = kernel_matrix(kernel, X) + noise_var * jnp.eye(N)
    L = jnp.linalg.cholesky(K)
    a = tri_solve(L, y)
    return -0.5 * jnp.sum(a * a) - P * jnp.sum(jnp.log(jnp.diagonal(L))) - 0.5 * N * P * LOG_2PI


def gpr_predict(kernel: ZonalKernel, X: EmbeddedInput, y, noise_var, Xs: EmbeddedInput) -> PosteriorMarginals:
    """Exact GP regression posterior marginals of f at ``Xs``."""
    y = _as_columns(y)
    N = y.shape[0]
    L = jnp.linalg.cholesky(kernel_matrix(kernel, X) + noise_var * jnp.eye(N))
    Ks = kernel_matrix(kernel, X, Xs)
    mean = Ks.T @ cho_solve(L, y)
    V = tri_solve(L, Ks)
    var = kernel_diag(kernel, Xs) - jnp.sum(V * V, axis=0)
    return PosteriorMarginals(mean, jnp.maximum(var, 0.0)[:, None] * np.ones((1, y.shape[1])))
