from __future__ import annotations

import math

import numpy as np
import pytest

from polyou.errors import InputError
from polyou.models import deterministic_vol, quintic_ou
from polyou.oulaw import ForwardVarianceCurve
from polyou.pricing.volswap import monotone_laplace, vol_swap, volswap_nodes
from polyou.transforms import desk_config

CURVE = ForwardVarianceCurve.parametric(0.025, 5.0, 0.06)


def test_nodes_integrate_lorentzian():
    v, w = volswap_nodes(0.2, 64, 64)
    assert np.dot(w, 1.0 / (1.0 + v * v)) == pytest.approx(math.pi / 2, abs=1e-10)
    assert np.all(w > 0) and np.all(v > 0)


def test_deterministic_flat_is_exact():
    assert vol_swap(deterministic_vol(0.04), 1.0) == pytest.approx(0.2, abs=1e-12)


def test_deterministic_curve_is_root_mean_variance():
    # zero variance of the realized variance: the rate is sqrt of the mean
    m = deterministic_vol(CURVE)
    T = 1.0
    assert vol_swap(m, T, cfg=desk_config()) == pytest.approx(math.sqrt(CURVE.integral(0, T) / T), abs=1e-4)


@pytest.fixture(scope="module")
def qcurve():
    return quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227, xi0=CURVE)


@pytest.mark.parametrize("T", [0.25, 1.0])
def test_jensen_bound(qcurve, T):
    assert vol_swap(qcurve, T) <= math.sqrt(CURVE.integral(0, T) / T) + 1e-8


def test_control_variate_level_does_not_matter(qcurve):
    T = 0.5
    a = vol_swap(qcurve, T)
    b = vol_swap(qcurve, T, sigma_cv=0.9 * math.sqrt(CURVE.integral(0, T) / T))
    assert a == pytest.approx(b, abs=1e-5)


def test_node_refinement_self_converges(qcurve):
    T = 0.5
    vals = [vol_swap(qcurve, T, n_body=n, n_tail=n) for n in (16, 32, 64, 128)]
    d = np.abs(np.diff(vals))
    assert d[-1] < 1e-6
    assert d[-1] <= d[0]


def test_monotone_bracket():
    m = deterministic_vol(0.04)
    F, slack = monotone_laplace(m, np.array([0.5, 1.0, 2.0]), 1.0, desk_config())
    assert np.all(slack == 0) and F == pytest.approx(np.exp(-0.04 * np.array([0.5, 1.0, 2.0])))


def test_input_errors(qcurve):
    with pytest.raises(InputError):
        vol_swap(qcurve, 0.0)
    with pytest.raises(InputError):
        vol_swap(qcurve, 1.0, sigma_cv=-0.1)
