from __future__ import annotations

import math

import numpy as np
import pytest

from polyou.errors import InputError
from polyou.pricing.quadrature import gauss_hermite, gauss_laguerre, gauss_legendre


def test_one_point_laguerre():
    r = gauss_laguerre(1)
    assert r.nodes[0] == pytest.approx(1.0) and r.weights[0] == pytest.approx(math.e)


def test_laguerre_exponential_integral():
    r = gauss_laguerre(32)
    assert np.dot(r.weights, np.exp(-r.nodes)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [0, 3, 10, 20])
def test_laguerre_exact_for_polynomial_moments(k):
    r = gauss_laguerre(16)
    assert np.dot(r.weights, r.nodes ** k * np.exp(-r.nodes)) == pytest.approx(math.factorial(k), rel=1e-10)


def test_laguerre_lewis_kernel_tail():
    # int_0^inf dx / (x^2 + 1/4) = pi, a slowly decaying integrand
    r = gauss_laguerre(128)
    err = abs(np.dot(r.weights, 1.0 / (r.nodes ** 2 + 0.25)) - math.pi)
    assert err < 1e-6, f"Laguerre-128 error on the Lewis kernel is {err:.2e}"


def test_rule_invariants():
    for r in (gauss_laguerre(64), gauss_legendre(20, 0.0, 3.0), gauss_hermite(40)):
        assert len(r.nodes) == len(r.weights) and np.all(r.weights > 0)
    assert np.all(gauss_laguerre(256).nodes > 0)
    with pytest.raises(InputError):
        gauss_laguerre(257)
    with pytest.raises(InputError):
        gauss_legendre(0)


def test_legendre_interval():
    r = gauss_legendre(10, 1.0, 3.0)
    assert np.dot(r.weights, r.nodes ** 5) == pytest.approx((3 ** 6 - 1) / 6)


def test_hermite_normal_moments():
    r = gauss_hermite(30)
    assert np.dot(r.weights, r.nodes ** 4) == pytest.approx(3.0)
    assert np.dot(r.weights, r.nodes ** 6) == pytest.approx(15.0)


def test_scaled_rule():
    r = gauss_laguerre(40).scaled(3.0)
    assert np.dot(r.weights, np.exp(-r.nodes / 3.0)) == pytest.approx(3.0)


def test_rules_are_read_only():
    r = gauss_laguerre(8)
    with pytest.raises(ValueError):
        r.nodes[0] = 1.0
