import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activated_dgp.specfun import (
    SphereDim,
    addition_factor,
    build_quadrature,
    gegenbauer,
    gegenbauer_at_one,
    gegenbauer_l2_norm,
    gegenbauer_series,
    num_harmonics,
    surface_area,
    surface_ratio,
)
from oracles import gegenbauer_explicit


@pytest.mark.parametrize("d, expected", [(3, 4 * math.pi), (2, 2 * math.pi), (7, 16 * math.pi**3 / 15)])
def test_surface_area(d, expected):
    assert surface_area(d) == pytest.approx(expected, rel=1e-5)


def test_surface_ratio_matches_areas():
    for d in range(3, 12):
        assert surface_ratio(d) == pytest.approx(surface_area(d - 1) / surface_area(d), rel=1e-12)


@pytest.mark.parametrize("d, n, expected", [(3, 0, 1), (3, 2, 5), (5, 3, 30), (3, 7, 15)])
def test_num_harmonics(d, n, expected):
    assert num_harmonics(d, n) == expected


def test_num_harmonics_rejects_bad_args():
    with pytest.raises(ValueError):
        num_harmonics(2, 1)
    with pytest.raises(ValueError):
        num_harmonics(3, -1)


def test_sphere_dim_validation():
    assert SphereDim(5).alpha == 1.5
    with pytest.raises(ValueError):
        SphereDim(2)


@pytest.mark.parametrize("n, alpha, t, expected", [(0, 0.5, 0.37, 1.0), (1, 1.5, 0.5, 1.5), (2, 1.0, 0.5, 0.0)])
def test_gegenbauer_values(n, alpha, t, expected):
    assert gegenbauer(n, alpha, t) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("n, alpha, expected", [(2, 0.5, 1.0), (2, 1.5, 6.0), (0, 2.0, 1.0)])
def test_gegenbauer_at_one(n, alpha, expected):
    assert gegenbauer_at_one(n, alpha) == pytest.approx(expected, rel=1e-12)


def test_gegenbauer_rejects_out_of_domain():
    with pytest.raises(ValueError):
        gegenbauer(2, 1.0, 1.1)
    with pytest.raises(ValueError):
        gegenbauer(-1, 1.0, 0.0)
    # tiny overshoot from rounding is tolerated
    assert np.isfinite(gegenbauer(3, 1.0, 1 + 1e-13))


def test_l2_norm_examples():
    assert gegenbauer_l2_norm(0, 3) == pytest.approx(2.0, rel=1e-12)
    assert gegenbauer_l2_norm(1, 3) == pytest.approx(2 / 3, rel=1e-12)


def test_quadrature_order_two():
    q = build_quadrature(2)
    np.testing.assert_allclose(sorted(q.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    with pytest.raises(ValueError):
        build_quadrature(1)
    assert build_quadrature(64).integrate(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 15), d=st.integers(3, 12), t=st.floats(-1, 1))
def test_recurrence_matches_explicit_sum(n, d, t):
    alpha = (d - 2) / 2
    ref = gegenbauer_explicit(n, alpha, t)
    assert gegenbauer(n, alpha, t) == pytest.approx(ref, rel=1e-9, abs=1e-9 * gegenbauer_at_one(n, alpha))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 20), d=st.integers(3, 12), t=st.floats(-1, 1))
def test_bounded_by_value_at_one(n, d, t):
    alpha = (d - 2) / 2
    assert abs(gegenbauer(n, alpha, t)) <= gegenbauer_at_one(n, alpha) * (1 + 1e-12)


@pytest.mark.parametrize("d", [3, 5, 7])
def test_orthogonality_and_norms(d):
    alpha = (d - 2) / 2
    q = build_quadrature(128)
    t = np.asarray(q.nodes)
    w = np.asarray(q.weights) * (1 - t * t) ** (alpha - 0.5)
    for n in range(8):
        for m in range(8):
            val = float(np.sum(w * gegenbauer(n, alpha, t) * gegenbauer(m, alpha, t)))
            if n == m:
                assert val == pytest.approx(gegenbauer_l2_norm(n, d), rel=1e-8)
            else:
                assert abs(val) < 1e-8


@pytest.mark.parametrize("d", [3, 5, 7])
def test_addition_theorem(d):
    """sum_j phi_nj(x) phi_nj(x) integrates to N_n, so the zonal diagonal is N_n / area."""
    alpha = (d - 2) / 2
    for n in range(13):
        diag = addition_factor(n, alpha) * gegenbauer_at_one(n, alpha) / surface_area(d)
        assert diag == pytest.approx(num_harmonics(d, n) / surface_area(d), rel=1e-10)


@pytest.mark.parametrize("d", [3, 5, 7])
def test_addition_theorem_reproducing(d):
    """Zonal projector onto degree n is idempotent: int P_n(x.z) P_n(z.y) dz = P_n(x.y)."""
    alpha = (d - 2) / 2
    rng = np.random.default_rng(d)
    Z = rng.standard_normal((200000, d))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    x, y = Z[0], Z[1]
    area = surface_area(d)
    for n in (1, 2, 3):
        def P(t):
            return addition_factor(n, alpha) * gegenbauer(n, alpha, np.clip(t, -1, 1)) / area

        mc = area * np.mean(P(Z[2:] @ x) * P(Z[2:] @ y))
        assert mc == pytest.approx(P(x @ y), abs=0.05 * P(1.0))


def test_series_matches_pointwise_sum():
    w = [0.3, -0.2, 0.1, 0.05, 0.0, 0.01]
    t = np.linspace(-1, 1, 17)
    expected = sum(c * gegenbauer(n, 1.5, t) for n, c in enumerate(w))
    np.testing.assert_allclose(np.asarray(gegenbauer_series(w, 1.5, t)), expected, atol=1e-14)
