"""Cholesky factorisation with jitter escalation and triangular solves."""
from __future__ import annotations

from functools import partial

import jax
import jax.numpy as jnp
from jax import lax
from jax.scipy.linalg import solve_triangular

# extra diagonal added (times a scale) when the previous attempt fails
ESCALATION = (0.0, 1e-6, 1e-4)


class NumericalError(RuntimeError):
    """Raised when a factorisation fails even after jitter escalation."""


def _is_concrete(x) -> bool:
    return not isinstance(x, jax.core.Tracer)


@partial(jax.jit, static_argnames="escalation")
def _escalating_cholesky(K, scale, escalation):
    eye = jnp.eye(K.shape[0], dtype=K.dtype)
    L = jnp.linalg.cholesky(K + escalation[0] * scale * eye)
    for level in escalation[1:]:
        L = lax.cond(
            jnp.all(jnp.isfinite(L)),
            lambda L=L: L,
            lambda level=level, L=L: jnp.linalg.cholesky(K + level * scale * eye),
        )
    return L


def robust_cholesky(K, scale=1.0, escalation=ESCALATION):
    """Lower Cholesky factor of K, retrying with growing diagonal jitter.

    Traceable: the retries are ``lax.cond`` branches, compiled once per
    shape. Called eagerly, a factor that is still non-finite raises
    ``NumericalError``.
    """
    L = _escalating_cholesky(jnp.asarray(K), scale, tuple(escalation))
    if _is_concrete(L) and not bool(jnp.all(jnp.isfinite(L))):
        raise NumericalError("Cholesky factorisation failed after jitter escalation")
    return L


def tri_solve(L, B, trans=False):
    """Solve L X = B (or L^T X = B when ``trans``) for lower-triangular L."""
    return solve_triangular(L, B, lower=True, trans=1 if trans else 0)


def cho_solve(L, B):
    """Solve (L L^T) X = B."""
    return tri_solve(L, tri_solve(L, B), trans=True)
