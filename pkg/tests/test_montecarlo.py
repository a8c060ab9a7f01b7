from __future__ import annotations

import math

import numpy as np
import pytest

from polyou.errors import InputError
from polyou.models import deterministic_vol
from polyou.montecarlo import (McConfig, exact_bergomi_vol, mc_call, mc_calls, mc_charfn, mc_laplace, mc_volswap,
                               mean_stderr, model_vol, simulate, simulate_terminal)
from polyou.oulaw import ou_mean_var
from polyou.pricing.blackscholes import bs_call
from polyou.transforms import cf_values, desk_config, laplace_values

SMALL = McConfig(paths=20_000, steps=200, seed=11)


def test_config_validation():
    for kw in (dict(paths=1), dict(paths=101), dict(steps=0), dict(seed=-1)):
        with pytest.raises(InputError):
            McConfig(**kw)


def test_reproducible_and_thread_invariant(quintic):
    a = simulate(quintic, [0.25, 0.5], SMALL)
    b = simulate(quintic, [0.25, 0.5], McConfig(paths=20_000, steps=200, seed=11, threads=4))
    assert np.array_equal(a.log_return, b.log_return) and np.array_equal(a.int_var, b.int_var)
    c = simulate(quintic, [0.25, 0.5], McConfig(paths=20_000, steps=200, seed=12))
    assert not np.array_equal(a.log_return, c.log_return)


def test_ou_terminal_law_is_exact(quintic):
    st = simulate(quintic, [0.5], McConfig(paths=100_000, steps=10, seed=3, antithetic=False))
    mean, var = ou_mean_var(quintic.ou, 0.5)
    x = st.x_T[0]
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / x.size)
    assert x.var() == pytest.approx(var, rel=0.02)


def test_martingale(quintic):
    lr, _, _ = simulate_terminal(quintic, 0.5, SMALL)
    m, se = mean_stderr(np.exp(lr), True)
    assert abs(m - 1.0) < 4 * se


def test_black_scholes_case():
    m = deterministic_vol(0.04, spot=100.0)
    p, se = mc_call(m, 100.0, 1.0, McConfig(paths=40_000, steps=50, seed=5))
    assert abs(p - float(bs_call(100.0, 100.0, 1.0, 0.2))) < 4 * se
    r, se_r = mc_volswap(m, 1.0, SMALL)
    assert r == pytest.approx(0.2, abs=1e-12) and se_r < 1e-12


def test_maturities_must_lie_on_grid(quintic):
    with pytest.raises(InputError):
        simulate(quintic, [0.3333, 1.0], McConfig(paths=100, steps=10))
    with pytest.raises(InputError):
        simulate(quintic, [0.0], SMALL)


def test_antithetic_pairs_reduce_variance():
    # a near-odd p makes quintic pairs almost identical, so use constant vol here
    st = simulate(deterministic_vol(0.04, spot=100.0), [0.25], SMALL)
    _, se_pair = mc_calls(st, 0.25, [100.0], 100.0)
    pay = np.maximum(100.0 * np.exp(st.log_return[0]) - 100.0, 0.0)
    assert se_pair[0] < pay.std(ddof=1) / math.sqrt(pay.size)


def test_charfn_and_laplace_agree_with_riccati(quintic):
    st = simulate(quintic, [0.25], McConfig(paths=50_000, steps=2000, seed=9))
    u = 3.0
    v, se = mc_charfn(st, 0.25, u)
    ref = cf_values(quintic, [u], 0.25, desk_config())[0]
    assert abs(v - ref) < 4 * se
    lv, lse = mc_laplace(st, 0.25, 2.0)
    assert abs(lv - laplace_values(quintic, [2.0], 0.25, desk_config())[0]) < 4 * lse


def test_exact_bergomi_vol_preserves_forward_variance(bergomi):
    vol = exact_bergomi_vol(bergomi, 1.2)
    st = simulate(bergomi, [0.5], McConfig(paths=40_000, steps=100, seed=2), vol=vol)
    mean, var = ou_mean_var(bergomi.ou, 0.5)
    sig2 = vol(0.5, st.x_T[0]) ** 2
    m, se = mean_stderr(sig2, True)
    assert abs(m - 0.025) < 4 * se


def test_model_vol(quintic):
    vol = model_vol(quintic)
    x = np.array([0.0, 0.5])
    from polyou.oulaw import g0
    assert vol(0.1, x) == pytest.approx(float(g0(quintic, 0.1)) * quintic.p(x))
