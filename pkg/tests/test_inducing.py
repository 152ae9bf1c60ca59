import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activated_dgp.inducing import (
    ActivatedInducing,
    PseudoPointInducing,
    SpectralMismatchError,
    cuf,
    cuu,
    nystrom_residual,
    random_directions,
    truncated_activation,
)
from activated_dgp.kernels import JITTER, EmbeddedInput, ZonalKernel, embed, kernel_diag, kernel_matrix
from activated_dgp.linalg import robust_cholesky, tri_solve
from activated_dgp.specfun import gegenbauer, num_harmonics
from activated_dgp.spectra import ShapeFunction, activation_spectrum
from oracles import central_difference, softplus_rescaled_np

ARC = ShapeFunction.arccosine()
RELU = ShapeFunction.relu()
SOFTPLUS = ShapeFunction.softplus(5.0)


def make(dirs, act=RELU, d=3, trunc=10, kernel=None, **kw):
    kernel = kernel or ZonalKernel.create(ARC, d)
    return ActivatedInducing.create(dirs, act, kernel, trunc, **kw), kernel


def test_truncated_activation_examples():
    ind0, _ = make(np.eye(3)[:1], trunc=0)
    assert float(truncated_activation(ind0, 0.3)) == pytest.approx(0.25)
    ind1, _ = make(np.eye(3)[:1], trunc=1)
    sig = activation_spectrum(RELU, 3, 1).values
    assert float(truncated_activation(ind1, 1.0)) == pytest.approx(sig[0] + sig[1] * 3)
    ind, _ = make(np.eye(5)[:1], act=SOFTPLUS, d=5, trunc=25)
    assert abs(float(truncated_activation(ind, -1.0))) < 0.02


def test_softplus_truncation_sup_error():
    ind, _ = make(np.eye(5)[:1], act=SOFTPLUS, d=5, trunc=25)
    t = np.linspace(-1, 1, 2001)
    err = np.max(np.abs(np.asarray(truncated_activation(ind, t)) - softplus_rescaled_np(t)))
    assert err < 0.02


def test_directions_normalised():
    raw = np.random.default_rng(0).normal(size=(6, 3)) * 5
    ind, _ = make(raw)
    np.testing.assert_allclose(np.linalg.norm(ind.directions, axis=1), 1.0, atol=1e-12)
    dirs = random_directions(np.random.default_rng(1), 4, 5)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


def test_spectral_mismatch():
    # the arc-cosine kernel is zero at odd n >= 3; a Matern-shaped ridge is not
    bumpy = ShapeFunction.matern52(0.5)
    with pytest.raises(SpectralMismatchError):
        make(np.eye(3), act=bumpy)
    make(np.eye(3), act=bumpy, allow_mismatch=True)
    make(np.eye(3), act=bumpy, kernel=ZonalKernel.create(ShapeFunction.matern52(), 3))
    # softplus(t) - t/2 is even, so softplus shares the arc-cosine parity pattern
    make(np.eye(3), act=SOFTPLUS)
    with pytest.raises(ValueError):
        make(np.eye(4))  # wrong dimension for the kernel


def test_cuf_examples():
    ind, k = make(np.eye(3)[:1])
    x = EmbeddedInput(jnp.asarray([[1.0, 0.0, 0.0]]), jnp.ones(1))
    assert float(cuf(ind, k, x)[0, 0]) == pytest.approx(float(truncated_activation(ind, 1.0)))
    ind0, k2 = make(np.eye(3)[:2], trunc=0, kernel=ZonalKernel.create(ARC, 3, amplitude=2.0))
    X = embed(np.random.default_rng(0).normal(size=(5, 2)), k2)
    np.testing.assert_allclose(cuf(ind0, k2, X), 0.25 * 2.0 * np.tile(X.radius, (2, 1)), rtol=1e-12)
    inds, ks = make(np.eye(3)[:1], act=SOFTPLUS, trunc=25)
    xa = EmbeddedInput(jnp.asarray([[-1.0, 0.0, 0.0]]), jnp.asarray([2.0]))
    assert abs(float(cuf(inds, ks, xa)[0, 0])) < 0.02 * 2.0


def test_reproducing_property_term_by_term():
    """<k(x, .), g~_m>_H written as sum sigma_n / lambda_n * lambda_n ... equals g~_m(x)."""
    rng = np.random.default_rng(2)
    ind, k = make(rng.normal(size=(3, 3)), trunc=9)
    X = embed(rng.normal(size=(4, 2)), k)
    sig, lam = ind.act_spectrum.values, ind.ker_spectrum.values
    a = 0.5
    t = np.clip(np.asarray(ind.directions) @ np.asarray(X.unit).T, -1, 1)
    brute = np.zeros_like(t)
    for n in range(10):
        if lam[n] != 0:
            brute += sig[n] / lam[n] * lam[n] * (n + a) / a * gegenbauer(n, a, t)
    np.testing.assert_allclose(cuf(ind, k, X), brute * np.asarray(X.radius)[None], atol=1e-12)


def test_cuu_examples():
    ind, k = make(np.eye(3)[:1], kernel=ZonalKernel.create(ARC, 3, amplitude=1.5))
    sig, lam = ind.act_spectrum.values, ind.ker_spectrum.values
    expected = sum(s * s / l * num_harmonics(3, n) for n, (s, l) in enumerate(zip(sig, lam)) if l != 0)
    assert float(cuu(ind, k, jitter=0.0)[0, 0]) == pytest.approx(1.5 * expected, rel=1e-12)
    assert all(w == 0.0 for w in ind.cuu_weights()[3::2])
    ind1, k1 = make(np.eye(3)[:2], trunc=1)
    assert float(cuu(ind1, k1, jitter=0.0)[0, 1]) == pytest.approx(sig[0] ** 2 / lam[0], rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), M=st.integers(1, 64), d=st.sampled_from([3, 5, 7]))
def test_cuu_psd(seed, M, d):
    ind, k = make(random_directions(np.random.default_rng(seed), M, d), act=SOFTPLUS, d=d, allow_mismatch=True)
    C = np.asarray(cuu(ind, k, jitter=0.0))
    np.testing.assert_allclose(C, C.T, atol=1e-14)
    assert np.linalg.eigvalsh(C).min() >= -1e-8 * max(1.0, C.max())


def test_pseudo_examples():
    k = ZonalKernel.create(ARC, 3)
    x = embed(np.array([[0.4, -0.1]]), k)
    ind = PseudoPointInducing.create(np.asarray(x.unit))
    # pseudo points live on the unit sphere, so compare with the unit-radius point
    xu = EmbeddedInput(x.unit, jnp.ones(1))
    assert float(cuf(ind, k, xu)[0, 0]) == pytest.approx(float(kernel_matrix(k, xu)[0, 0]))
    Z = random_directions(np.random.default_rng(0), 5, 3)
    ind5 = PseudoPointInducing.create(Z)
    C = np.asarray(cuu(ind5, k))
    np.testing.assert_allclose(np.diag(C), 1.0 + JITTER, rtol=1e-14)
    assert np.linalg.eigvalsh(C).min() > 0


def test_nystrom_residual():
    rng = np.random.default_rng(4)
    k = ZonalKernel.create(ARC, 3)
    X = embed(rng.normal(size=(6, 2)), k)
    # pseudo points at the data (unit radius) span f at those points
    Xu = EmbeddedInput(X.unit, jnp.ones(6))
    np.testing.assert_allclose(nystrom_residual(PseudoPointInducing.create(np.asarray(X.unit)), k, Xu), 0.0, atol=1e-6)
    empty = PseudoPointInducing.create(np.zeros((0, 3)))
    np.testing.assert_allclose(nystrom_residual(empty, k, X), np.asarray(X.radius) ** 2)
    ind, _ = make(random_directions(rng, 20, 3))
    assert np.all(np.asarray(nystrom_residual(ind, k, X)) >= 0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_nystrom_domination(seed):
    rng = np.random.default_rng(seed)
    k = ZonalKernel.create(ARC, 3)
    X = embed(rng.normal(size=(8, 2)), k)
    for ind in (make(random_directions(rng, 12, 3))[0], PseudoPointInducing.create(random_directions(rng, 12, 3))):
        L = robust_cholesky(cuu(ind, k))
        A = tri_solve(L, cuf(ind, k, X))
        raw = np.asarray(kernel_diag(k, X) - jnp.sum(A * A, axis=0))
        assert raw.min() >= -1e-8 * max(1.0, float(np.max(kernel_diag(k, X))))


def test_direction_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    ind, k = make(rng.normal(size=(3, 3)), act=SOFTPLUS)
    X = embed(rng.normal(size=(4, 2)), k)
    weights = rng.normal(size=(3, 4))

    def f(raw):
        return jnp.sum(weights * cuf(ActivatedInducing(jnp.asarray(raw), ind.activation, ind.kernel_shape, 3,
                                                       ind.truncation, True), k, X))

    raw0 = np.asarray(ind.raw)
    g = np.asarray(jax.grad(f)(jnp.asarray(raw0)))
    fd = central_difference(lambda r: float(f(r)), raw0, h=1e-5)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)
