from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from polyou.errors import InputError
from polyou.models import deterministic_vol
from polyou.oulaw import ForwardVarianceCurve, ou_mean_var
from polyou.pricing.quadrature import gauss_hermite
from polyou.vix import VIX_WINDOW, vix_future, vix_implied_vol, vix_mean_square, vix_option, vix_squared_poly

T = 1.0 / 12.0


def test_deterministic_vix_is_window_average():
    curve = ForwardVarianceCurve.parametric(0.02, 3.0, 0.05)
    m = deterministic_vol(curve)
    expect = math.sqrt(curve.integral(T, T + VIX_WINDOW) / VIX_WINDOW)
    assert vix_future(m, T) == pytest.approx(expect, rel=1e-12)
    assert float(vix_option(m, T, VIX_WINDOW, 0.9 * expect)) == pytest.approx(0.1 * expect, rel=1e-10)


def test_mean_square_matches_poly_expectation(quintic):
    poly = vix_squared_poly(quintic, T)
    mean, var = ou_mean_var(quintic.ou, T)
    r = gauss_hermite(64)
    e = np.dot(r.weights, poly(mean + math.sqrt(var) * np.asarray(r.nodes)))
    assert e == pytest.approx(vix_mean_square(quintic, T), rel=1e-10)
    # flat forward variance: E[VIX^2] is the curve level
    assert e == pytest.approx(0.025, rel=1e-10)


def test_jensen_and_convergence(quintic):
    f64 = vix_future(quintic, T)
    f96 = vix_future(quintic, T, quad=gauss_hermite(96))
    assert f64 == pytest.approx(f96, abs=1e-12)
    assert f64 <= math.sqrt(vix_mean_square(quintic, T))


def test_option_against_adaptive_quadrature(quintic):
    poly = vix_squared_poly(quintic, T)
    mean, var = ou_mean_var(quintic.ou, T)
    sd = math.sqrt(var)
    K = vix_future(quintic, T)

    def f(z):
        return max(math.sqrt(max(poly(mean + sd * z), 0.0)) - K, 0.0) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    ref = quad(f, -12, 12, points=np.linspace(-3, 3, 25), limit=400, epsabs=1e-13)[0]
    assert float(vix_option(quintic, T, VIX_WINDOW, K)) == pytest.approx(ref, abs=1e-9)


def test_option_parity_and_shape(quintic):
    fut = vix_future(quintic, T)
    K = np.array([0.1, 0.13, 0.15, 0.2, 0.3])
    c = vix_option(quintic, T, VIX_WINDOW, K)
    slope = np.diff(c) / np.diff(K)
    assert np.all(slope < 0) and np.all(np.diff(slope) > -1e-12)
    assert float(vix_option(quintic, T, VIX_WINDOW, 0.0)) == pytest.approx(fut, abs=1e-12)
    assert np.all(c >= np.maximum(fut - K, 0.0) - 1e-12)


def test_implied_vol_round_trips(quintic):
    fut = vix_future(quintic, T)
    price = float(vix_option(quintic, T, VIX_WINDOW, fut))
    iv = vix_implied_vol(price, fut, fut, T)
    assert iv > 0.3  # the fast factor makes VIX options volatile


def test_input_errors(quintic):
    with pytest.raises(InputError):
        vix_squared_poly(quintic, 0.0)
    with pytest.raises(InputError):
        vix_option(quintic, T, VIX_WINDOW, -1.0)
