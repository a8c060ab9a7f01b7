"""Heston characteristic function used as a control variate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..errors import InputError


@dataclass(frozen=True)
class HestonParams:
    v0: float
    theta: float
    kappa: float
    sigma_v: float
    rho_h: float

    def __post_init__(self) -> None:
        if min(self.v0, self.theta, self.kappa, self.sigma_v) <= 0:
            raise InputError("Heston v0, theta, kappa, sigma_v must be > 0")
        if abs(self.rho_h) > 1:
            raise InputError("Heston correlation must lie in [-1, 1]")


def heston_cf(hp: HestonParams, u, T: float):
    """E[exp(i u log(S_T/S_0))], zero rates, in the branch-stable little-trap form."""
    if not T > 0:
        raise InputError("T must be > 0")
    u = np.asarray(u, dtype=complex)
    k, th, s, r, v0 = hp.kappa, hp.theta, hp.sigma_v, hp.rho_h, hp.v0
    xi = k - s * r * 1j * u
    d = np.sqrt(xi * xi + s * s * (1j * u + u * u))
    d = np.where(d.real < 0, -d, d)
    # (xi - d) / s^2 without cancellation for small vol-of-vol
    m = -(1j * u + u * u) / (xi + d)
    g = m * s * s / (xi + d)
    e = np.exp(-d * T)
    C = k * th * (m * T - 2.0 / (s * s) * _log1p(g * (1.0 - e) / (1.0 - g)))
    Dv = m * (1.0 - e) / (1.0 - g * e)
    out = np.exp(C + Dv * v0)
    return out[()] if out.ndim == 0 else out


def _log1p(z):
    # numpy's complex log1p loses relative accuracy for tiny arguments
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return 0.5 * np.log1p(2.0 * x + x * x + y * y) + 1j * np.arctan2(y, 1.0 + x)


def heston_call(hp: HestonParams, S: float, K: float, T: float) -> float:
    """Reference Heston call by adaptive quadrature of the Lewis integral."""
    k = np.log(S / K)

    def f(u):
        return (np.exp(1j * u * k) * heston_cf(hp, u - 0.5j, T)).real / (u * u + 0.25)

    val, _ = quad(f, 0.0, np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
    return float(S - np.sqrt(S * K) / np.pi * val)
