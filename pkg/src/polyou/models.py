"""Model constructors binding the OU driver, volatility series and normalization."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .oulaw import ForwardVarianceCurve, G0Table, OUParams
from .powerseries import PowerSeries


@dataclass(frozen=True)
class ModelSpec:
    """sigma_t = g0(t) p(X_t); log-price driven by rho dW + sqrt(1 - rho^2) dW_perp.

    With ``g0_table`` None the scale follows the forward-variance normalization,
    otherwise the table is used as is and ``xi0`` is informational only.
    """

    ou: OUParams
    p: PowerSeries
    rho: float
    xi0: ForwardVarianceCurve | None
    spot: float = 1.0
    g0_table: G0Table | None = None
    family: str = "custom"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.rho) and abs(self.rho) <= 1):
            raise InputError("rho must lie in [-1, 1]")
        if not (np.isfinite(self.spot) and self.spot > 0):
            raise InputError("spot must be > 0")
        if self.p.is_zero():
            raise InputError("volatility series p must be nonzero")
        if self.g0_table is None and self.xi0 is None:
            raise InputError("forward-variance mode needs a xi0 curve")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "spot", float(self.spot))

    @property
    def normalization(self) -> str:
        return "raw-g0" if self.g0_table is not None else "forward-variance"

    def with_spot(self, spot: float) -> "ModelSpec":
        return replace(self, spot=float(spot))


def _xi(xi0) -> ForwardVarianceCurve:
    if isinstance(xi0, ForwardVarianceCurve):
        return xi0
    return ForwardVarianceCurve.flat(float(xi0))


def _ou_from_eps(alpha: float, eps: float) -> OUParams:
    if not eps > 0:
        raise InputError("eps must be > 0")
    if alpha > 0:
        raise InputError("alpha must be <= 0")
    return OUParams(a=0.0, b=alpha / eps, c=math.exp(alpha * math.log(eps)), x0=0.0)


def quintic_ou(rho: float, alpha: float, eps: float, p0: float, p1: float, p3: float, p5: float,
               xi0=0.025, spot: float = 1.0) -> ModelSpec:
    """Quintic OU: p(x) = p0 + p1 x + p3 x^3 + p5 x^5 driven by a fast OU factor."""
    if min(p0, p1, p3, p5) < 0:
        raise InputError("quintic coefficients must be >= 0")
    return ModelSpec(ou=_ou_from_eps(alpha, eps), p=PowerSeries((p0, p1, 0.0, p3, 0.0, p5)),
                     rho=rho, xi0=_xi(xi0), spot=spot, family="quintic")


def bergomi_truncated(rho: float, alpha: float, eps: float, eta: float, N: int = 8,
                      xi0=0.025, spot: float = 1.0) -> ModelSpec:
    """One-factor Bergomi with exp(eta x / 2) replaced by its degree-N Taylor polynomial."""
    if N < 1 or N > 32:
        raise InputError("N must lie in 1..32")
    coeffs = tuple((eta / 2.0) ** k / math.factorial(k) for k in range(N + 1))
    return ModelSpec(ou=_ou_from_eps(alpha, eps), p=PowerSeries(coeffs), rho=rho,
                     xi0=_xi(xi0), spot=spot, family="bergomi")


def stein_stein(rho: float, a: float, b: float, c: float, x0: float,
                g0_table: G0Table | float = 1.0, spot: float = 1.0) -> ModelSpec:
    """Stein-Stein: sigma_t = g0(t) X_t with g0 supplied directly."""
    table = g0_table if isinstance(g0_table, G0Table) else G0Table.constant(float(g0_table))
    return ModelSpec(ou=OUParams(a, b, c, x0), p=PowerSeries((0.0, 1.0)), rho=rho,
                     xi0=None, spot=spot, g0_table=table, family="stein_stein")


def deterministic_vol(xi0=0.04, spot: float = 1.0) -> ModelSpec:
    """Constant p: sigma_t^2 = xi0(t), the Black-Scholes case."""
    return ModelSpec(ou=OUParams(0.0, -1.0, 1.0, 0.0), p=PowerSeries((1.0,)), rho=0.0,
                     xi0=_xi(xi0), spot=spot, family="custom")
