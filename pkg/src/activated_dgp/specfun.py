"""Special functions on the hypersphere.

Gegenbauer polynomials, surface areas, harmonic dimension counts and the
Gauss-Legendre rule used for all one-dimensional integrals over [-1, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import jax.numpy as jnp
import numpy as np

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class SphereDim:
    """Ambient dimension ``d`` of the sphere S^{d-1} living in R^d."""

    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"sphere dimension must be an integer >= 3, got {self.d}")

    @property
    def alpha(self) -> float:
        return (self.d - 2) / 2.0


def _as_dim(d) -> int:
    return d.d if isinstance(d, SphereDim) else int(d)


def surface_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1} in R^d."""
    d = _as_dim(d)
    if d < 1:
        raise ValueError(f"surface_area requires d >= 1, got {d}")
    return 2.0 * math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d))


def surface_ratio(d: int) -> float:
    """omega_d = Omega_{d-2} / Omega_{d-1} = Gamma(d/2) / (Gamma((d-1)/2) sqrt(pi))."""
    d = _as_dim(d)
    return math.exp(math.lgamma(0.5 * d) - math.lgamma(0.5 * (d - 1))) / math.sqrt(math.pi)


def num_harmonics(d: int, n: int) -> int:
    """Number of linearly independent spherical harmonics of degree n on S^{d-1}."""
    d = _as_dim(d)
    if d < 3 or n < 0:
        raise ValueError(f"num_harmonics requires d >= 3 and n >= 0, got d={d}, n={n}")
    if n == 0:
        return 1
    return math.comb(n + d - 1, d - 1) - math.comb(n + d - 3, d - 1)


def gegenbauer_at_one(n: int, alpha: float) -> float:
    """C_n^{(alpha)}(1) = Gamma(2 alpha + n) / (Gamma(2 alpha) n!)."""
    if n == 0:
        return 1.0
    return math.exp(math.lgamma(2 * alpha + n) - math.lgamma(2 * alpha) - math.lgamma(n + 1))


def addition_factor(n: int, alpha: float) -> float:
    """(n + alpha) / alpha, the weight of degree n in the addition theorem."""
    return (n + alpha) / alpha


def gegenbauer_l2_norm(n: int, d: int) -> float:
    """Integral of [C_n^{(alpha)}(t)]^2 (1 - t^2)^{alpha - 1/2} over [-1, 1]."""
    d = _as_dim(d)
    alpha = (d - 2) / 2.0
    log_val = (
        math.log(math.pi)
        + (1 - 2 * alpha) * math.log(2.0)
        + math.lgamma(n + 2 * alpha)
        - math.lgamma(n + 1)
        - math.log(n + alpha)
        - 2 * math.lgamma(alpha)
    )
    return math.exp(log_val)


def _check_domain(t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1.0 + DOMAIN_TOL):
        raise ValueError("Gegenbauer argument outside [-1, 1]")


def gegenbauer(n: int, alpha: float, t):
    """C_n^{(alpha)}(t) by the three-term recurrence.

    Works elementwise on arrays; raises ``ValueError`` when any ``t`` lies
    outside [-1, 1] by more than 1e-12.
    """
    if n < 0 or alpha <= 0:
        raise ValueError(f"gegenbauer requires n >= 0 and alpha > 0, got n={n}, alpha={alpha}")
    _check_domain(t)
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    prev = np.ones_like(t)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 2.0 * alpha * t
    for k in range(2, n + 1):
        prev, cur = cur, (2.0 * t * (k + alpha - 1) * cur - (k + 2 * alpha - 2) * prev) / k
    return cur if cur.ndim else float(cur)


def gegenbauer_series(weights, alpha: float, t):
    """Evaluate sum_n weights[n] * C_n^{(alpha)}(t) with the recurrence.

    Written with ``jax.numpy`` so it is differentiable in ``t``. ``weights``
    is a static sequence of floats; ``t`` must already be clipped to [-1, 1].
    """
    weights = [float(w) for w in weights]
    t = jnp.asarray(t)
    out = jnp.full(t.shape, weights[0]) if weights else jnp.zeros(t.shape)
    if len(weights) < 2:
        return out
    prev = jnp.ones_like(t)
    cur = 2.0 * alpha * t
    out = out + weights[1] * cur
    for k in range(2, len(weights)):
        prev, cur = cur, (2.0 * t * (k + alpha - 1) * cur - (k + 2 * alpha - 2) * prev) / k
        if weights[k] != 0.0:
            out = out + weights[k] * cur
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: tuple
    weights: tuple
    order: int

    def integrate(self, f, a: float = -1.0, b: float = 1.0) -> float:
        """Integrate ``f`` over [a, b] by affinely mapping the rule."""
        x = np.asarray(self.nodes)
        w = np.asarray(self.weights)
        half = 0.5 * (b - a)
        return float(half * np.dot(w, np.asarray(f(half * x + 0.5 * (a + b)), dtype=float)))


@lru_cache(maxsize=None)
def build_quadrature(order: int = 128) -> QuadratureRule:
    if order < 2:
        raise ValueError(f"quadrature order must be >= 2, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(tuple(nodes.tolist()), tuple(weights.tolist()), order)
