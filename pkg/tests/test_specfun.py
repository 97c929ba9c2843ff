import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mflsm import specfun
from mflsm.errors import DomainError

from oracles import series_j, series_y

WRONSKIAN_X = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0)


@pytest.mark.parametrize(
    "fn, n, x, expected",
    [
        (specfun.bessel_j, 0, 1.0, 0.7651976866),
        (specfun.bessel_j, 1, 1.0, 0.4400505857),
        (specfun.bessel_y, 0, 1.0, 0.0882569642),
        (specfun.bessel_y, 1, 1.0, -0.7812128213),
    ],
)
def test_tabulated_values(fn, n, x, expected):
    assert fn(n, x) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("n, x", [(0, 1.0), (1, 1.0), (0, 0.3), (1, 7.9), (0, 8.1), (1, 25.0)])
def test_values_match_series_oracle(n, x):
    assert abs(specfun.bessel_j(n, x) - series_j(n, x)) < 1e-12
    assert abs(specfun.bessel_y(n, x) - series_y(n, x)) < 1e-12


def test_j0_small_argument_limit():
    assert specfun.bessel_j(0, 1e-8) == pytest.approx(1.0, abs=1e-12)


def test_hankel_composition():
    assert specfun.hankel2(0, 1.0) == pytest.approx(0.7651976866 - 0.0882569642j, abs=1e-10)
    assert specfun.hankel2(1, 1.0) == pytest.approx(0.4400505857 + 0.7812128213j, abs=1e-10)


def test_hankel_large_argument_magnitude():
    x = 50.0
    assert abs(specfun.hankel2(0, x)) == pytest.approx(math.sqrt(2 / (math.pi * x)), rel=1e-2)


def test_wronskian_canonical_point():
    x = 2.5
    w = specfun.bessel_j(1, x) * specfun.bessel_y(0, x) - specfun.bessel_j(0, x) * specfun.bessel_y(1, x)
    assert abs(w - 2 / (math.pi * x)) < 1e-10


@pytest.mark.parametrize("x", WRONSKIAN_X)
@pytest.mark.parametrize("n", range(6))
def test_wronskian_orders(n, x):
    w = specfun.bessel_j(n + 1, x) * specfun.bessel_y(n, x) - specfun.bessel_j(n, x) * specfun.bessel_y(n + 1, x)
    assert abs(w - 2 / (math.pi * x)) < 1e-9


def test_recurrence_consistency():
    xs = np.linspace(1.0, 60.0, 40)
    for n in range(1, 51):
        lhs = specfun.bessel_j(n - 1, xs) + specfun.bessel_j(n + 1, xs)
        rhs = 2 * n / xs * specfun.bessel_j(n, xs)
        scale = np.maximum(np.abs(rhs), np.abs(specfun.bessel_j(n - 1, xs)))
        assert np.all(np.abs(lhs - rhs) <= 1e-8 * np.maximum(scale, 1e-300) + 1e-300)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 1), x=st.floats(1e-3, 10.0))
def test_series_agreement_property(n, x):
    assert abs(specfun.bessel_j(n, x) - series_j(n, x)) < 1e-9
    assert abs(specfun.bessel_y(n, x) - series_y(n, x)) < 1e-9 * max(1.0, abs(series_y(n, x)))


def test_derivatives_match_recurrence():
    # C_n' = C_{n-1} - (n/x) C_n, and C_0' = -C_1
    x = np.linspace(0.5, 30, 50)
    assert np.allclose(specfun.bessel_j_prime(0, x), -specfun.bessel_j(1, x), atol=1e-13)
    assert np.allclose(specfun.hankel2_prime(0, x), -specfun.hankel2(1, x), atol=1e-12)
    for n in range(1, 5):
        j_ref = specfun.bessel_j(n - 1, x) - n / x * specfun.bessel_j(n, x)
        h_ref = specfun.hankel2(n - 1, x) - n / x * specfun.hankel2(n, x)
        assert np.allclose(specfun.bessel_j_prime(n, x), j_ref, atol=1e-13)
        assert np.allclose(specfun.hankel2_prime(n, x), h_ref, atol=1e-12)


def test_array_and_scalar_returns():
    assert isinstance(specfun.bessel_j(0, 1.0), float)
    assert isinstance(specfun.hankel2(0, 1.0), complex)
    out = specfun.bessel_y(2, np.array([1.0, 2.0]))
    assert out.shape == (2,)


@pytest.mark.parametrize(
    "n, x",
    [(0, 0.0), (0, -1.0), (-1, 1.0), (1.5, 1.0), (201, 1.0), (0, float("nan")), (0, float("inf"))],
)
def test_domain_errors(n, x):
    for fn in (specfun.bessel_j, specfun.bessel_y, specfun.hankel2):
        with pytest.raises(DomainError):
            fn(n, x)


def test_order_cap_allows_200():
    assert np.isfinite(specfun.bessel_j(200, 150.0))


def test_series_oracle_sweep_speed():
    xs = np.logspace(np.log10(0.05), np.log10(60), 500)
    t0 = time.perf_counter()
    specfun.bessel_j(0, xs), specfun.bessel_y(1, xs)
    assert time.perf_counter() - t0 < 1.0
