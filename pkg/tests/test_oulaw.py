from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from polyou.errors import InputError
from polyou.models import bergomi_truncated, quintic_ou
from polyou.oulaw import (ForwardVarianceCurve, G0Table, OUParams, conditional_law, expected_p_squared, g0,
                          g0_prime, gaussian_moments, mean_variance, ou_mean_var)


def test_conditional_law_closed_form():
    p = OUParams(0.3, -2.0, 0.5, 0.1)
    m, v = conditional_law(p, 0.2, 1.0, 0.4)
    h = 0.8
    assert m == pytest.approx(math.exp(-2 * h) * 0.4 + 0.3 * (1 - math.exp(-2 * h)) / 2)
    assert v == pytest.approx(0.25 * (1 - math.exp(-4 * h)) / 4)


def test_brownian_limit():
    m, v = ou_mean_var(OUParams(0.2, 0.0, 1.5, 1.0), 2.0)
    assert (m, v) == (pytest.approx(1.4), pytest.approx(4.5))


def test_rejects_backward_time():
    with pytest.raises(InputError):
        conditional_law(OUParams(0, -1, 1), 1.0, 0.5, 0.0)


@given(st.floats(-2, 2), st.floats(0.01, 3), st.integers(0, 10))
def test_gaussian_moments_against_quadrature(mu, var, n):
    # 20-point Gauss-Hermite is exact for these polynomial moments
    z, w = np.polynomial.hermite_e.hermegauss(20)
    ref = np.dot(w, (mu + math.sqrt(var) * z) ** n) / w.sum()
    assert gaussian_moments(mu, var, n)[n] == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_curves():
    c = ForwardVarianceCurve.parametric(0.025, 5.0, 0.06)
    assert float(c(0.0)) == pytest.approx(0.025)
    assert c.integral(0.0, 2.0) == pytest.approx(quad(c, 0.0, 2.0)[0])
    assert float(c.derivative(0.3)) == pytest.approx((float(c(0.3 + 1e-6)) - float(c(0.3 - 1e-6))) / 2e-6)
    pw = ForwardVarianceCurve.piecewise([(0.0, 0.02), (1.0, 0.04)])
    assert float(pw(0.5)) == 0.02 and float(pw(1.0)) == 0.04
    assert pw.integral(0.5, 1.5) == pytest.approx(0.03)
    assert ForwardVarianceCurve.flat(0.04).integral(0, 2) == pytest.approx(0.08)


@pytest.mark.parametrize("kw", [dict(kind="flat", level=-1.0), dict(kind="parametric", V0=-1.0),
                                dict(kind="piecewise", times=(0.5,), values=(0.1,)), dict(kind="other")])
def test_curve_validation(kw):
    with pytest.raises(InputError):
        ForwardVarianceCurve(**kw)


def test_g0_table():
    t = G0Table((0.0, 1.0), (1.0, 3.0))
    assert float(t(0.5)) == 2.0 and float(t(2.0)) == 3.0
    assert float(t.derivative(0.5)) == 2.0
    with pytest.raises(InputError):
        G0Table((1.0, 0.0), (1.0, 1.0))


@pytest.mark.parametrize("model", [quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227),
                                   bergomi_truncated(-0.7, -0.7, 1 / 52, 1.2, 8)])
def test_normalization_reproduces_forward_variance(model):
    for t in (0.0, 0.01, 0.5, 2.0):
        assert float(g0(model, t)) ** 2 * float(expected_p_squared(model, t)) == pytest.approx(0.025)


def test_expected_p_squared_by_quadrature():
    m = quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227)
    mean, var = ou_mean_var(m.ou, 0.3)
    sd = math.sqrt(var)
    ref = quad(lambda x: m.p(x) ** 2 * math.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)),
               -12 * sd, 12 * sd)[0]
    assert float(expected_p_squared(m, 0.3)) == pytest.approx(ref, rel=1e-9)


def test_g0_prime_matches_finite_difference():
    m = quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227,
                   xi0=ForwardVarianceCurve.parametric(0.025, 5.0, 0.06))
    for t in (0.01, 0.2, 1.0):
        h = 1e-6 * t
        fd = (float(g0(m, t + h)) - float(g0(m, t - h))) / (2 * h)
        assert float(g0_prime(m, t)) == pytest.approx(fd, rel=1e-5)


def test_mean_variance_is_curve_average():
    xi = ForwardVarianceCurve.parametric(0.025, 5.0, 0.06)
    m = quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227, xi0=xi)
    assert mean_variance(m, 1.0) == pytest.approx(xi.integral(0, 1.0))


def test_ou_rejects_zero_diffusion():
    with pytest.raises(InputError):
        OUParams(0.0, -1.0, 0.0)


def test_moments_broadcast():
    out = gaussian_moments(np.array([0.0, 1.0]), np.array([1.0, 2.0]), 4)
    assert out.shape == (5, 2)
    assert out[4, 0] == pytest.approx(3.0)
    assert out[2, 1] == pytest.approx(3.0)
