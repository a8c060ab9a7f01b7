from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyou.errors import InputError
from polyou.models import quintic_ou
from polyou.powerseries import (PowerSeries, antiderivative, convolve, derivative, double_factorial_diagnostic,
                                evaluate, romano_touzi_series)

coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8)


def test_from_pairs_sums_duplicates():
    p = PowerSeries.from_pairs([(3, 1.0), (0, 2.0), (3, 0.5)])
    assert p.coeffs == (2.0, 0.0, 0.0, 1.5)


@pytest.mark.parametrize("bad", [(), (1.0, math.nan), (math.inf,)])
def test_rejects_bad_coefficients(bad):
    with pytest.raises(InputError):
        PowerSeries(bad)


def test_rejects_negative_index():
    with pytest.raises(InputError):
        PowerSeries.from_pairs([(-1, 1.0)])


def test_cauchy_product_known():
    # (1 + x)^2 = 1 + 2x + x^2, truncated at degree 1
    p = PowerSeries((1.0, 1.0))
    assert convolve(p, p, 2).coeffs == (1.0, 2.0, 1.0)
    assert convolve(p, p, 1).coeffs == (1.0, 2.0)
    assert convolve(p, p, 4).coeffs == (1.0, 2.0, 1.0, 0.0, 0.0)


def test_derivative_and_primitive():
    p = PowerSeries((1.0, 2.0, 3.0))
    assert derivative(p).coeffs == (2.0, 6.0)
    assert antiderivative(p).coeffs == (0.0, 1.0, 1.0, 1.0)
    assert derivative(PowerSeries((4.0,))).coeffs == (0.0,)


def test_diagnostic_vanishes_for_bergomi_taylor():
    # exp(eta x / 2) coefficients are negligible to the double factorial
    eta = 1.2
    p = PowerSeries(tuple((eta / 2) ** k / math.factorial(k) for k in range(30)))
    d = double_factorial_diagnostic(p)
    assert d[-1] < d[5] < d[0]
    assert d[-1] < 0.2


def test_diagnostic_value():
    # k = 3: (|p3| 2!!)^(1/3) = (0.5 * 2)^(1/3)
    d = double_factorial_diagnostic(PowerSeries((0.0, 0.0, 0.0, 0.5)))
    assert d == [0.0, 0.0, pytest.approx(1.0)]


@given(coeffs, coeffs, st.floats(-2, 2))
def test_product_evaluates_to_product(a, b, x):
    p, q = PowerSeries(tuple(a)), PowerSeries(tuple(b))
    r = convolve(p, q, p.degree + q.degree)
    assert evaluate(r, x) == pytest.approx(evaluate(p, x) * evaluate(q, x), rel=1e-9, abs=1e-9)


@given(coeffs, coeffs)
def test_product_commutes(a, b):
    p, q = PowerSeries(tuple(a)), PowerSeries(tuple(b))
    assert convolve(p, q, 6).coeffs == pytest.approx(convolve(q, p, 6).coeffs)


@given(coeffs)
def test_derivative_inverts_primitive(a):
    p = PowerSeries(tuple(a))
    assert derivative(antiderivative(p)).coeffs == pytest.approx(p.coeffs)


@settings(max_examples=50)
@given(coeffs, st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_horner_matches_polyval(a, z):
    p = PowerSeries(tuple(a))
    assert complex(evaluate(p, z)) == pytest.approx(complex(np.polyval(a[::-1], z)), rel=1e-9, abs=1e-9)


def test_romano_touzi_series_definitions():
    m = quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227)
    p1, r1, mr2, r2 = romano_touzi_series(m)
    a, b, c = m.ou.a, m.ou.b, m.ou.c
    x = np.linspace(-1, 1, 7)
    p = m.p(x)
    dp = derivative(m.p)(x)
    assert p1(x) == pytest.approx(p * p)
    assert r1(x) == pytest.approx(-((a + b * x) * p + 0.5 * c * c * dp) / c)
    assert r2(x) == pytest.approx(antiderivative(m.p)(x) / c)
    assert mr2(x) == pytest.approx(-r2(x))
