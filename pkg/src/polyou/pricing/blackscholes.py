"""Black-Scholes prices and implied volatility (zero rates, S is the forward)."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from ..errors import OutOfBounds


def bs_call(S, K, T, sigma):
    S, K, T, sigma = (np.asarray(v, dtype=float) for v in (S, K, T, sigma))
    sd = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = np.log(S / K) / sd + 0.5 * sd
        out = S * ndtr(d1) - K * ndtr(d1 - sd)
    out = np.where(sd > 0, out, np.maximum(S - K, 0.0))
    return out[()] if out.ndim == 0 else out


def bs_vega(S, K, T, sigma):
    sd = sigma * math.sqrt(T)
    if sd <= 0:
        return 0.0
    d1 = math.log(S / K) / sd + 0.5 * sd
    return S * math.sqrt(T) * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)


def implied_vol(price: float, S: float, K: float, T: float, tol: float = 1e-10) -> float:
    """Black-Scholes implied volatility by Newton steps safeguarded with bisection."""
    intrinsic = max(S - K, 0.0)
    if not (intrinsic < price < S) or T <= 0 or K <= 0:
        raise OutOfBounds(f"call price {price!r} outside ({intrinsic!r}, {S!r})")
    lo, hi = 0.0, 1.0
    while float(bs_call(S, K, T, hi)) < price:
        lo, hi = hi, 2 * hi
        if hi > 1e3:
            raise OutOfBounds("implied volatility above 1000")
    sigma = 0.5 * (lo + hi)
    ptol = min(tol, 1e-12 * S)
    for _ in range(200):
        diff = float(bs_call(S, K, T, sigma)) - price
        if abs(diff) <= ptol:
            break
        if diff > 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(S, K, T, sigma)
        cand = sigma - diff / vega if vega > 0 else -1.0
        sigma = cand if lo < cand < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return sigma


def implied_vols(prices, S, K, T) -> np.ndarray:
    """Element-wise implied vol; NaN where the price is outside the no-arbitrage bracket."""
    prices, S, K = np.broadcast_arrays(np.asarray(prices, float), np.asarray(S, float), np.asarray(K, float))
    out = np.full(prices.shape, np.nan)
    for idx in np.ndindex(prices.shape):
        try:
            out[idx] = implied_vol(float(prices[idx]), float(S[idx]), float(K[idx]), T)
        except OutOfBounds:
            pass
    return out
