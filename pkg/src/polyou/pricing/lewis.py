"""European calls by the single-integral Lewis representation.

C = S - sqrt(S K)/pi * int_0^inf Re[e^{i u k} phi(u - i/2)] / (u^2 + 1/4) du,  k = log(S/K).
"""
from __future__ import annotations


import numpy as np
from scipy.optimize import minimize

from ..errors import BoundsViolated, FitFailed, InputError, NumericalError
from ..models import ModelSpec
from ..oulaw import mean_variance
from ..riccati import RiccatiConfig
from ..transforms import cf_values, desk_config
from .heston import HestonParams, heston_call, heston_cf
from .quadrature import QuadratureRule, gauss_laguerre

DEFAULT_NODES = 128
DEFAULT_RETRIES = 3
BOUND_SLACK = 1e-10


def lewis_rule(n: int = DEFAULT_NODES, scale: float = 1.0) -> QuadratureRule:
    """n-node Gauss-Laguerre rule for the Lewis integral, nodes optionally stretched by ``scale``."""
    rule = gauss_laguerre(n)
    return rule if scale == 1.0 else rule.scaled(scale)


def lewis_integral(phi_shift: np.ndarray, u: np.ndarray, w: np.ndarray, S: float, strikes: np.ndarray) -> np.ndarray:
    k = np.log(S / strikes)
    kern = w / (u * u + 0.25)
    vals = np.real(np.exp(1j * np.outer(k, u)) * phi_shift[None, :]) @ kern
    return np.sqrt(S * strikes) / np.pi * vals


def lewis_calls(model: ModelSpec, strikes, T: float, cfg: RiccatiConfig | None = None,
                quad: QuadratureRule | None = None, cv: HestonParams | None = None,
                threads: int = 1, spot: float | None = None, retries: int = DEFAULT_RETRIES) -> np.ndarray:
    """Call prices for a strike vector; one characteristic-function batch per call."""
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes <= 0) or not T > 0:
        raise InputError("strikes and T must be > 0")
    S = model.spot if spot is None else float(spot)
    cfg = cfg or desk_config()
    rule = quad if quad is not None else lewis_rule()
    u, w = np.asarray(rule.nodes), np.asarray(rule.weights)
    phi = cf_values(model, u - 0.5j, T, cfg, threads=threads, retries=retries)
    if cv is None:
        prices = S - lewis_integral(phi, u, w, S, strikes)
    else:
        phi_h = heston_cf(cv, u - 0.5j, T)
        base = np.array([heston_call(cv, S, K, T) for K in strikes])
        prices = base - lewis_integral(phi - phi_h, u, w, S, strikes)
    lo = np.maximum(S - strikes, 0.0) - BOUND_SLACK * S
    if np.any(prices < lo) or np.any(prices > S * (1 + BOUND_SLACK)) or not np.isfinite(prices).all():
        bad = int(np.flatnonzero(~((prices >= lo) & (prices <= S * (1 + BOUND_SLACK))))[0])
        raise BoundsViolated(f"call price {prices[bad]!r} at K={strikes[bad]!r}, T={T!r} outside no-arbitrage bounds")
    return prices


def lewis_call(model: ModelSpec, K: float, T: float, cfg: RiccatiConfig | None = None,
               quad: QuadratureRule | None = None, cv: HestonParams | None = None) -> float:
    return float(lewis_calls(model, [K], T, cfg, quad, cv)[0])


_CV_NODES = np.geomspace(0.25, 40.0, 12)
# (log lower, log upper) for v0, theta, kappa, sigma_v
_CV_LOG_BOUNDS = np.log(np.array([[1e-6, 4.0], [1e-6, 4.0], [1e-3, 100.0], [1e-4, 10.0]]))
_CV_RHO = 0.999


def _cv_params(theta: np.ndarray) -> HestonParams:
    t = 0.5 * (np.tanh(theta[:4]) + 1.0)
    pos = np.exp(_CV_LOG_BOUNDS[:, 0] + t * (_CV_LOG_BOUNDS[:, 1] - _CV_LOG_BOUNDS[:, 0]))
    return HestonParams(*pos, rho_h=float(_CV_RHO * np.tanh(theta[4])))


def _cv_theta(hp: HestonParams) -> np.ndarray:
    pos = np.log([hp.v0, hp.theta, hp.kappa, hp.sigma_v])
    t = (pos - _CV_LOG_BOUNDS[:, 0]) / (_CV_LOG_BOUNDS[:, 1] - _CV_LOG_BOUNDS[:, 0])
    t = np.clip(t, 1e-12, 1 - 1e-12)
    return np.concatenate([np.arctanh(2 * t - 1), [np.arctanh(np.clip(hp.rho_h / _CV_RHO, -1 + 1e-12, 1 - 1e-12))]])


def control_variate_residual(model_phi: np.ndarray, hp: HestonParams, T: float) -> float:
    return float(np.sum(np.abs(model_phi - heston_cf(hp, _CV_NODES - 0.5j, T)) ** 2))


def fit_control_variate(model: ModelSpec, T: float, cfg: RiccatiConfig | None = None) -> HestonParams:
    """Heston parameters whose transform is closest to the model's on a fixed node set."""
    target = cf_values(model, _CV_NODES - 0.5j, T, cfg or desk_config(), retries=DEFAULT_RETRIES)
    vbar = mean_variance(model, T)
    start = HestonParams(vbar, vbar, 1.0, 1.0, float(np.clip(model.rho, -0.99, 0.99)))

    def obj(theta):
        try:
            return control_variate_residual(target, _cv_params(theta), T)
        except (InputError, FloatingPointError):
            return 1e10

    res = minimize(obj, _cv_theta(start), method="Nelder-Mead",
                   options={"maxfev": 4000, "xatol": 1e-10, "fatol": 1e-16})
    if not np.isfinite(res.fun):
        raise FitFailed("control variate fit did not produce a finite residual")
    best = _cv_params(res.x)
    if control_variate_residual(target, best, T) > control_variate_residual(target, start, T):
        return start
    return best


def lewis_calls_with_fitted_cv(model: ModelSpec, strikes, T: float, cfg: RiccatiConfig | None = None,
                               quad: QuadratureRule | None = None) -> np.ndarray:
    """Fit a Heston control variate and price; falls back to no control variate on failure."""
    try:
        cv = fit_control_variate(model, T, cfg)
    except (FitFailed, NumericalError):
        cv = None
    return lewis_calls(model, strikes, T, cfg, quad, cv)
