from __future__ import annotations

import math

import pytest

from polyou.errors import InputError
from polyou.models import bergomi_truncated, deterministic_vol, quintic_ou, stein_stein


def test_quintic_ou_parameters():
    m = quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227)
    assert m.ou.b == pytest.approx(-0.6 * 52)
    assert m.ou.c == pytest.approx((1 / 52) ** -0.6)
    assert m.p.coeffs == (0.01, 1.0, 0.0, 0.214, 0.0, 0.227)
    assert m.family == "quintic" and m.normalization == "forward-variance"


def test_bergomi_taylor_coefficients():
    m = bergomi_truncated(-0.7, -0.7, 1 / 52, 1.2, 8)
    assert m.p.degree == 8
    assert m.p.coeffs[3] == pytest.approx(0.6 ** 3 / 6)
    assert float(m.p(0.4)) == pytest.approx(math.exp(0.24), rel=1e-8)


def test_stein_stein_raw_mode():
    m = stein_stein(-0.5, 0.05, -1.0, 0.5, 0.2, g0_table=2.0)
    assert m.normalization == "raw-g0" and float(m.g0_table(3.0)) == 2.0


@pytest.mark.parametrize("call", [
    lambda: quintic_ou(1.5, -0.6, 1 / 52, 0.01, 1, 0.2, 0.2),
    lambda: quintic_ou(-0.5, 0.6, 1 / 52, 0.01, 1, 0.2, 0.2),
    lambda: quintic_ou(-0.5, -0.6, 0.0, 0.01, 1, 0.2, 0.2),
    lambda: quintic_ou(-0.5, -0.6, 1 / 52, -0.01, 1, 0.2, 0.2),
    lambda: bergomi_truncated(-0.5, -0.6, 1 / 52, 1.0, 0),
    lambda: deterministic_vol(0.04, spot=-1.0),
])
def test_invalid_models(call):
    with pytest.raises(InputError):
        call()


def test_with_spot():
    m = deterministic_vol(0.04).with_spot(100.0)
    assert m.spot == 100.0
