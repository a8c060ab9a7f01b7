"""Volatility swap rate by Laplace inversion with a Black-Scholes control variate.

K = sigma_cv + 1/(2 sqrt(pi)) int_0^inf (F_BS(u) - F(u)) u^{-3/2} du,  F_BS(u) = exp(-u sigma_cv^2),
where F(u) = E[exp(-(u/T) int_0^T sigma^2)]. With u = v^2 the integrand becomes
2 (F_BS(v^2) - F(v^2)) / v^2, which is bounded at v = 0.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import InputError, NumericalError
from ..models import ModelSpec
from ..oulaw import mean_variance
from ..riccati import RiccatiConfig
from ..transforms import desk_config, laplace_values
from .quadrature import gauss_legendre

DEFAULT_NODES = 64
SPLIT = 3.0
# largest admissible error in the rate from nodes bracketed by monotonicity
TAIL_TOL = 1e-5


def volswap_nodes(sigma_cv: float, n_body: int = DEFAULT_NODES, n_tail: int = DEFAULT_NODES):
    """Nodes in v and weights for int_0^inf f(v) dv.

    Gauss-Legendre on [0, SPLIT/sigma_cv]; the tail [v0, inf) is mapped to (0, 1]
    through v = v0 / t so its 1/v^2 decay becomes a bounded integrand.
    """
    v0 = SPLIT / sigma_cv
    body = gauss_legendre(n_body, 0.0, v0)
    tail = gauss_legendre(n_tail, 0.0, 1.0)
    t = np.asarray(tail.nodes)
    v_tail = v0 / t
    w_tail = np.asarray(tail.weights) * v0 / t ** 2
    return np.concatenate([body.nodes, v_tail]), np.concatenate([body.weights, w_tail])


def vol_swap(model: ModelSpec, T: float, cfg: RiccatiConfig | None = None, sigma_cv: float | None = None,
             n_body: int = DEFAULT_NODES, n_tail: int = DEFAULT_NODES, threads: int = 1) -> float:
    """Fair strike of E[sqrt((1/T) int_0^T sigma^2 dt)]."""
    if not T > 0:
        raise InputError("T must be > 0")
    if sigma_cv is None:
        sigma_cv = math.sqrt(mean_variance(model, T))
    if not sigma_cv > 0:
        raise InputError("sigma_cv must be > 0")
    v, w = volswap_nodes(sigma_cv, n_body, n_tail)
    u = v * v
    F, slack = monotone_laplace(model, u, T, cfg or desk_config(), threads)
    scale = 1.0 / (2.0 * math.sqrt(math.pi))
    bound = scale * float(np.dot(w, 2.0 * slack / u))
    if bound > TAIL_TOL:
        bad = float(u[np.argmax(slack)])
        raise NumericalError(f"Laplace transform unreliable near u={bad:.6g}; error bound {bound:.2e}")
    f = 2.0 * (np.exp(-u * sigma_cv ** 2) - F) / u
    return float(sigma_cv + scale * np.dot(w, f))


def monotone_laplace(model: ModelSpec, u: np.ndarray, T: float, cfg: RiccatiConfig, threads: int = 1):
    """Laplace transform at nodes u with failed nodes bracketed by monotonicity.

    Nodes are scanned in increasing u. A node fails if its solve fails or its
    value exceeds the last accepted one; since F is non-increasing and
    nonnegative it then lies in [0, floor], and is set to floor / 2. Returns the
    values and the half-width of that bracket per node (0 where accepted).
    """
    F, ok = laplace_values(model, u, T, cfg, threads=threads, raise_errors=False)
    out = np.empty_like(F)
    slack = np.zeros_like(F)
    floor = 1.0
    for i in np.argsort(u, kind="stable"):
        if ok[i] and F[i] <= floor + 1e-12:
            out[i] = F[i]
            floor = min(floor, F[i])
        else:
            out[i] = slack[i] = 0.5 * floor
    return out, slack
