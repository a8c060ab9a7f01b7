"""VIX futures and options by Gaussian quadrature over the OU state at expiry.

Given X_T = y, the law of X_t for t > T is Gaussian with mean linear in y, so
E[p^2(X_t) | X_T = y] is a polynomial in y. Integrating the forward variance
over the window [T, T + delta] gives VIX^2 as a polynomial in y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InputError, NegativeVariance
from .models import ModelSpec
from .oulaw import conditional_law, expected_p_squared, g0, ou_mean_var
from .pricing.blackscholes import implied_vol
from .pricing.quadrature import QuadratureRule, gauss_hermite, gauss_legendre

VIX_WINDOW = 30.0 / 365.0
DEFAULT_HERMITE = 64
TIME_NODES = 64
NEG_TOL = 1e-12
# standardized state range for the split option integral (mass beyond is below 1e-22)
Z_RANGE = 10.0


@dataclass(frozen=True, eq=False)
class VixSquaredPoly:
    coeffs: np.ndarray
    T: float
    delta: float

    def __call__(self, y):
        return Polynomial(self.coeffs)(y)


def vix_squared_poly(model: ModelSpec, T: float, delta: float = VIX_WINDOW) -> VixSquaredPoly:
    if not (T > 0 and delta > 0):
        raise InputError("T and delta must be > 0")
    pp = np.convolve(model.p.array(), model.p.array())
    rule = gauss_legendre(TIME_NODES, T, T + delta)
    total = Polynomial([0.0])
    for t, w in zip(rule.nodes, rule.weights):
        total = total + w * g0(model, t) ** 2 * _cond_p2(model, pp, T, t)
    return VixSquaredPoly(coeffs=(total / delta).coef, T=T, delta=delta)


def _cond_p2(model: ModelSpec, pp: np.ndarray, T: float, t: float) -> Polynomial:
    """E[p^2(X_t) | X_T = y] as a polynomial in y."""
    mean0, var = conditional_law(model.ou, T, t, 0.0)
    slope = math.exp(model.ou.b * (t - T))
    m = Polynomial([mean0, slope])
    moments = [Polynomial([1.0]), m]
    for k in range(2, pp.size):
        moments.append(m * moments[-1] + (k - 1) * var * moments[-2])
    out = Polynomial([0.0])
    for k, c in enumerate(pp):
        out = out + c * moments[k]
    return out


def _state_nodes(model: ModelSpec, T: float, quad: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    mean, var = ou_mean_var(model.ou, T)
    return mean + math.sqrt(var) * np.asarray(quad.nodes), np.asarray(quad.weights)


def _vix_at_nodes(model: ModelSpec, T: float, delta: float, quad: QuadratureRule):
    poly = vix_squared_poly(model, T, delta)
    y, w = _state_nodes(model, T, quad)
    v2 = poly(y)
    if np.any(v2 < -NEG_TOL):
        raise NegativeVariance(f"VIX^2 negative at y={y[np.argmin(v2)]:.6g}")
    return np.sqrt(np.maximum(v2, 0.0)), w


def vix_future(model: ModelSpec, T: float, delta: float = VIX_WINDOW, quad: QuadratureRule | None = None) -> float:
    vix, w = _vix_at_nodes(model, T, delta, quad or gauss_hermite(DEFAULT_HERMITE))
    return float(np.dot(w, vix))


def vix_option(model: ModelSpec, T: float, delta: float, K, quad: QuadratureRule | None = None):
    """E[(VIX_T - K)^+] for scalar or array K.

    The payoff has kinks where VIX^2(y) = K^2, so the Gaussian integral over the
    standardized state on [-Z_RANGE, Z_RANGE] is split at those roots and each
    piece gets Gauss-Legendre with the normal density; ``quad`` only sets the
    node count per piece.
    """
    Karr = np.asarray(K, dtype=float)
    if np.any(Karr < 0):
        raise InputError("VIX strike must be >= 0")
    n = len(quad.nodes) if quad is not None else DEFAULT_HERMITE
    poly = vix_squared_poly(model, T, delta)
    mean, var = ou_mean_var(model.ou, T)
    sd = math.sqrt(var)
    zpoly = Polynomial(poly.coeffs)(Polynomial([mean, sd]))
    base = gauss_legendre(n, -1.0, 1.0)
    out = np.empty(Karr.size)
    for j, k in enumerate(Karr.ravel()):
        roots = (zpoly - k * k).roots()
        cuts = np.sort(roots[(np.abs(roots.imag) < 1e-9) & (np.abs(roots.real) < Z_RANGE)].real)
        edges = np.concatenate([[-Z_RANGE], cuts, [Z_RANGE]])
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo < 1e-14:
                continue
            z = 0.5 * (hi - lo) * np.asarray(base.nodes) + 0.5 * (hi + lo)
            w = 0.5 * (hi - lo) * np.asarray(base.weights) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
            v2 = zpoly(z)
            if np.any(v2 < -NEG_TOL):
                raise NegativeVariance(f"VIX^2 negative at y={mean + sd * z[np.argmin(v2)]:.6g}")
            total += float(np.dot(w, np.maximum(np.sqrt(np.maximum(v2, 0.0)) - k, 0.0)))
        out[j] = total
    return float(out[0]) if Karr.ndim == 0 else out.reshape(Karr.shape)


def vix_implied_vol(price: float, future: float, K: float, T: float) -> float:
    """Black implied volatility with the VIX future as forward."""
    return implied_vol(price, future, K, T)


def vix_mean_square(model: ModelSpec, T: float, delta: float = VIX_WINDOW) -> float:
    """E[VIX_T^2] = (1/delta) int_T^{T+delta} E[sigma_t^2] dt."""
    rule = gauss_legendre(TIME_NODES, T, T + delta)
    vals = np.asarray(g0(model, rule.nodes)) ** 2 * expected_p_squared(model, rule.nodes)
    return float(np.dot(rule.weights, vals) / delta)
