"""Gegenbauer spectra of zonal kernels and activation functions.

A zonal function s(x^T x') on S^{d-1} expands as
``sum_n c_n (n + alpha)/alpha C_n^{(alpha)}(x^T x')``. For kernels the c_n are
the Mercer eigenvalues (lambda_n); for activations they are the coefficients
sigma_n of the ridge function sigma(w^T x).

Coefficients are obtained with Gauss-Legendre quadrature of the Funk-Hecke
integral in the angle variable, or in closed form for the first-order arc
cosine kernel (odd d) and the ReLU.
"""
from __future__ import annotations

import csv
import math
import threading
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import partial

import jax
import jax.numpy as jnp
import mpmath
import numpy as np

from .specfun import (
    QuadratureRule,
    SphereDim,
    build_quadrature,
    gegenbauer_at_one,
    surface_ratio,
)

ZERO_THRESHOLD = 1e-9
DEFAULT_QUADRATURE_ORDER = 128


class ShapeKind(str, Enum):
    ARCCOSINE1 = "ArcCosine1"
    MATERN52 = "Matern52Zonal"
    RELU = "ReLU"
    SOFTPLUS = "SoftplusRescaled"


class SpectrumSource(str, Enum):
    ANALYTIC = "Analytic"
    QUADRATURE = "Quadrature"


# -- shape functions -------------------------------------------------------


@jax.custom_jvp
def arccosine_shape(t):
    """First-order arc-cosine shape (1/pi)(sqrt(1 - t^2) + t (pi - arccos t))."""
    t = jnp.clip(t, -1.0, 1.0)
    return (jnp.sqrt(jnp.maximum(1.0 - t * t, 0.0)) + t * (jnp.pi - jnp.arccos(t))) / jnp.pi


@arccosine_shape.defjvp
def _arccosine_shape_jvp(primals, tangents):
    (t,), (dt,) = primals, tangents
    # the sqrt singularities at t = +-1 cancel; s'(t) = (pi - arccos t) / pi
    tc = jnp.clip(t, -1.0, 1.0)
    return arccosine_shape(t), (jnp.pi - jnp.arccos(tc)) / jnp.pi * dt


@partial(jax.custom_jvp, nondiff_argnums=(1, 2))
def matern52_shape(t, lengthscale=1.0, variance=1.0):
    """Matern-5/2 restricted to the sphere, as a function of chordal distance."""
    r = jnp.sqrt(jnp.maximum(2.0 * (1.0 - jnp.clip(t, -1.0, 1.0)), 0.0))
    z = jnp.sqrt(5.0) * r / lengthscale
    return variance * (1.0 + z + z * z / 3.0) * jnp.exp(-z)


@matern52_shape.defjvp
def _matern52_shape_jvp(lengthscale, variance, primals, tangents):
    (t,), (dt,) = primals, tangents
    r = jnp.sqrt(jnp.maximum(2.0 * (1.0 - jnp.clip(t, -1.0, 1.0)), 0.0))
    z = jnp.sqrt(5.0) * r / lengthscale
    # ds/dt = -(1/r) ds/dr, finite at r = 0
    slope = variance * 5.0 / (3.0 * lengthscale**2) * (1.0 + z) * jnp.exp(-z)
    return matern52_shape(t, lengthscale, variance), slope * dt


def relu_shape(t):
    return jnp.maximum(t, 0.0)


def softplus_rescaled_shape(t, beta=5.0):
    """Softplus with inverse temperature beta, affinely fixed so s(-1)=0, s(1)=1."""
    lo = jnp.logaddexp(0.0, -beta) / beta
    hi = jnp.logaddexp(0.0, beta) / beta
    return (jnp.logaddexp(0.0, beta * t) / beta - lo) / (hi - lo)


@dataclass(frozen=True)
class ShapeFunction:
    """A function s: [-1, 1] -> R defining a zonal kernel or ridge activation.

    ``params`` is stored as a sorted tuple of (name, value) pairs so shapes are
    hashable and can key the spectrum cache.
    """

    kind: ShapeKind
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        object.__setattr__(self, "params", tuple(sorted((str(k), float(v)) for k, v in dict(self.params).items())))

    @classmethod
    def arccosine(cls):
        return cls(ShapeKind.ARCCOSINE1)

    @classmethod
    def matern52(cls, lengthscale: float = 1.0, variance: float = 1.0):
        return cls(ShapeKind.MATERN52, (("lengthscale", lengthscale), ("variance", variance)))

    @classmethod
    def relu(cls):
        return cls(ShapeKind.RELU)

    @classmethod
    def softplus(cls, beta: float = 5.0):
        return cls(ShapeKind.SOFTPLUS, (("beta", beta),))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def is_kernel(self) -> bool:
        return self.kind in (ShapeKind.ARCCOSINE1, ShapeKind.MATERN52)

    @property
    def kinks(self) -> tuple:
        """Points in (-1, 1) where the shape is not smooth."""
        return (0.0,) if self.kind == ShapeKind.RELU else ()

    def __call__(self, t):
        p = self.param_dict
        if self.kind == ShapeKind.ARCCOSINE1:
            return arccosine_shape(t)
        if self.kind == ShapeKind.MATERN52:
            return matern52_shape(t, p.get("lengthscale", 1.0), p.get("variance", 1.0))
        if self.kind == ShapeKind.RELU:
            return relu_shape(t)
        return softplus_rescaled_shape(t, p.get("beta", 5.0))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": self.param_dict}

    @classmethod
    def from_dict(cls, data: dict) -> "ShapeFunction":
        return cls(ShapeKind(data["kind"]), tuple(data.get("params", {}).items()))


# -- spectra ---------------------------------------------------------------


@dataclass(frozen=True)
class ZonalSpectrum:
    sphere: SphereDim
    coeffs: tuple
    truncation: int
    source: SpectrumSource
    zero_threshold: float = ZERO_THRESHOLD
    shape: ShapeFunction | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.coeffs) != self.truncation + 1:
            raise ValueError("spectrum length must equal truncation + 1")

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def addition_weights(self) -> tuple:
        """coeff_n * (n + alpha) / alpha, ready for ``gegenbauer_series``."""
        a = self.sphere.alpha
        return tuple(c * (n + a) / a for n, c in enumerate(self.coeffs))


def apply_threshold(values, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
    values = np.array(values, dtype=float)
    values[np.abs(values) < threshold] = 0.0
    return values


def _angle_nodes(shape: ShapeFunction, quad: QuadratureRule):
    """Quadrature nodes/weights in the angle theta in [0, pi], split at kinks."""
    cuts = sorted({0.0, math.pi, *(math.acos(k) for k in shape.kinks)})
    x = np.asarray(quad.nodes)
    w = np.asarray(quad.weights)
    thetas, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        thetas.append(half * x + 0.5 * (a + b))
        weights.append(half * w)
    return np.concatenate(thetas), np.concatenate(weights)


def funk_hecke_eigenvalues(shape: ShapeFunction, sphere, truncation: int,
                           quad: QuadratureRule | None = None) -> np.ndarray:
    """Raw (unthresholded) coefficients for degrees 0..truncation.

    The integral over t in [-1, 1] is carried out in theta = arccos t, where
    the weight (1 - t^2)^{(d-3)/2} dt becomes sin^{d-2}(theta) d theta and the
    arc-cosine and Matern shapes are smooth.
    """
    sphere = sphere if isinstance(sphere, SphereDim) else SphereDim(sphere)
    quad = quad or build_quadrature(DEFAULT_QUADRATURE_ORDER)
    d, alpha = sphere.d, sphere.alpha
    theta, w = _angle_nodes(shape, quad)
    t = np.cos(theta)
    base = w * np.asarray(shape(t), dtype=float) * np.sin(theta) ** (d - 2)
    out = np.empty(truncation + 1)
    prev, cur = np.ones_like(t), 2.0 * alpha * t
    for n in range(truncation + 1):
        if n == 0:
            c_n = prev
        elif n == 1:
            c_n = cur
        else:
            prev, cur = cur, (2.0 * t * (n + alpha - 1) * cur - (n + 2 * alpha - 2) * prev) / n
            c_n = cur
        out[n] = surface_ratio(d) / gegenbauer_at_one(n, alpha) * float(np.dot(base, c_n))
    return out


def funk_hecke_eigenvalue(shape: ShapeFunction, sphere, n: int,
                          quad: QuadratureRule | None = None) -> float:
    if n < 0:
        raise ValueError("degree must be non-negative")
    return float(funk_hecke_eigenvalues(shape, sphere, n, quad)[n])


# closed form for the arc-cosine kernel, odd d, in exact rational arithmetic.
# A value is a dict {power of pi: Fraction}.

def _double_factorial(k: int) -> int:
    return 1 if k <= 0 else math.prod(range(k, 0, -2))


def _sin_cos_integral(a: int, b: int) -> dict:
    """int_0^pi sin^a(x) cos^b(x) dx."""
    if b % 2 == 1:
        return {}
    r = Fraction(_double_factorial(a - 1) * _double_factorial(b - 1), _double_factorial(a + b))
    return {1: r} if a % 2 == 0 else {0: 2 * r}


def _ramp_sin_cos_integral(a: int, b: int) -> dict:
    """int_0^pi (pi - x) sin^a(x) cos^b(x) dx via integration by parts."""
    if b % 2 == 0:
        # integrand symmetric about pi/2, so the ramp averages to pi/2
        return {p + 1: r / 2 for p, r in _sin_cos_integral(a, b).items()}
    half = (b - 1) // 2
    out: dict = {}
    for i in range(half + 1):
        q = 2 * i + a + 1
        scale = Fraction(math.comb(half, i) * (-1) ** i, q)
        for p, r in _sin_cos_integral(q, 0).items():
            out[p] = out.get(p, Fraction(0)) + scale * r
    return out


def _gegenbauer_power_coeffs(n: int, alpha: Fraction) -> list:
    """Exact coefficients c_j of C_n^{(alpha)}(z) = sum_j c_j z^{n - 2j}."""
    coeffs = []
    for j in range(n // 2 + 1):
        rising = math.prod((alpha + i for i in range(n - j)), start=Fraction(1))
        c = Fraction((-1) ** j * 2 ** (n - 2 * j), math.factorial(j) * math.factorial(n - 2 * j)) * rising
        coeffs.append(c)
    return coeffs


def arccosine_eigenvalue_analytic(sphere, n: int) -> float:
    """Closed-form eigenvalue of the first-order arc-cosine kernel (odd d only).

    Every piece is a rational multiple of 1, pi or pi^2, so the sum is carried
    out exactly and only the final combination is rounded (50 digits).
    """
    sphere = sphere if isinstance(sphere, SphereDim) else SphereDim(sphere)
    d = sphere.d
    if d % 2 == 0:
        raise NotImplementedError(f"analytic arc-cosine eigenvalues need odd d, got d={d}")
    if n < 0:
        raise ValueError("degree must be non-negative")
    k = (d - 1) // 2
    omega = Fraction(math.factorial(2 * k), 4**k * math.factorial(k) * math.factorial(k - 1))
    c_at_one = Fraction(math.comb(n + d - 3, n))
    m = d - 2
    total: dict = {}
    for j, c in enumerate(_gegenbauer_power_coeffs(n, Fraction(d - 2, 2))):
        p = n - 2 * j
        for part in (_sin_cos_integral(m + 1, p), _ramp_sin_cos_integral(m, p + 1)):
            for power, r in part.items():
                total[power] = total.get(power, Fraction(0)) + c * r
    scale = omega / c_at_one
    with mpmath.workdps(50):
        val = mpmath.mpf(0)
        for power, r in total.items():
            if r:
                val += mpmath.mpf(r.numerator) / r.denominator * mpmath.pi ** (power - 1)
        val *= mpmath.mpf(scale.numerator) / scale.denominator
        return float(val)


def relu_coefficient_analytic(sphere, n: int) -> float:
    """Closed-form Gegenbauer coefficient sigma_n of max(0, t)."""
    sphere = sphere if isinstance(sphere, SphereDim) else SphereDim(sphere)
    d = sphere.d
    lg = math.lgamma
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n == 0:
        return math.exp(lg(d / 2) - lg((d + 1) / 2)) / (2.0 * math.sqrt(math.pi))
    if n == 1:
        return math.exp(lg(d / 2) + lg((d + 1) / 2) - lg((d - 1) / 2) - lg(d / 2 + 1)) / (2.0 * (d - 1))
    if n % 2 == 1:
        return 0.0
    sign = (-1) ** (n // 2 - 1)
    log_mag = lg(d / 2) + lg(n - 1) - lg(n / 2) - lg(n / 2 + (d + 1) / 2) - n * math.log(2.0)
    return sign * math.exp(log_mag) / math.sqrt(math.pi)


# -- cached spectrum builders ------------------------------------------------

_cache: dict = {}
_cache_lock = threading.Lock()


def _cached(key, build):
    # dict reads are atomic; writes go through the lock and never overwrite
    hit = _cache.get(key)
    if hit is not None:
        return hit
    # spectra are constants even when first requested inside a jit trace
    with jax.ensure_compile_time_eval():
        value = build()
    with _cache_lock:
        return _cache.setdefault(key, value)


def clear_cache():
    with _cache_lock:
        _cache.clear()


def activation_spectrum(shape: ShapeFunction, sphere, truncation: int,
                        zero_threshold: float = ZERO_THRESHOLD) -> ZonalSpectrum:
    """sigma_0..sigma_N of an activation; closed form for ReLU, quadrature otherwise."""
    sphere = sphere if isinstance(sphere, SphereDim) else SphereDim(sphere)
    if truncation < 0:
        raise ValueError("truncation must be >= 0")

    def build():
        if shape.kind == ShapeKind.RELU:
            raw = [relu_coefficient_analytic(sphere, n) for n in range(truncation + 1)]
            source = SpectrumSource.ANALYTIC
        else:
            raw = funk_hecke_eigenvalues(shape, sphere, truncation)
            source = SpectrumSource.QUADRATURE
        vals = apply_threshold(raw, zero_threshold)
        return ZonalSpectrum(sphere, tuple(vals.tolist()), truncation, source, zero_threshold, shape)

    return _cached(("activation", shape, sphere.d, truncation, zero_threshold), build)


def kernel_spectrum(shape: ShapeFunction, sphere, truncation: int,
                    zero_threshold: float = ZERO_THRESHOLD) -> ZonalSpectrum:
    """Mercer eigenvalues lambda_0..lambda_N of a zonal kernel shape."""
    sphere = sphere if isinstance(sphere, SphereDim) else SphereDim(sphere)
    if truncation < 0:
        raise ValueError("truncation must be >= 0")
    if not shape.is_kernel:
        raise ValueError(f"{shape.kind.value} is not a kernel shape")

    def build():
        if shape.kind == ShapeKind.ARCCOSINE1 and sphere.d % 2 == 1:
            raw = [arccosine_eigenvalue_analytic(sphere, n) for n in range(truncation + 1)]
            source = SpectrumSource.ANALYTIC
        else:
            raw = funk_hecke_eigenvalues(shape, sphere, truncation)
            source = SpectrumSource.QUADRATURE
        vals = apply_threshold(raw, zero_threshold)
        if np.any(vals < 0):
            warnings.warn(
                f"clamping {int(np.sum(vals < 0))} negative eigenvalue(s) of {shape.kind.value} to 0",
                RuntimeWarning,
            )
            vals = np.maximum(vals, 0.0)
        return ZonalSpectrum(sphere, tuple(vals.tolist()), truncation, source, zero_threshold, shape)

    return _cached(("kernel", shape, sphere.d, truncation, zero_threshold), build)


def write_spectrum_csv(spectrum: ZonalSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "value", "source", "is_zero"])
        for n, v in enumerate(spectrum.coeffs):
            writer.writerow([n, repr(float(v)), spectrum.source.value, int(v == 0.0)])
