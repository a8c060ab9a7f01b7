"""Monte Carlo oracle: exact OU transitions, left-point Euler for the log-price.

Random numbers come from fixed blocks of ``BLOCK`` paths. Block j draws from a
Philox stream keyed by (seed, j), so results do not depend on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError
from .models import ModelSpec
from .oulaw import g0 as g0_fn
from .oulaw import ou_mean_var

BLOCK = 4096

VolFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    steps: int = 2000  # per unit maturity
    seed: int = 12345
    antithetic: bool = True
    threads: int = 1

    def __post_init__(self) -> None:
        if self.paths < 2 or (self.antithetic and self.paths % 2):
            raise InputError("paths must be >= 2, and even when antithetic")
        if self.steps < 1:
            raise InputError("steps must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InputError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class PathStats:
    """Per-path log(S_T/S_0), int_0^T sigma^2 dt and X_T at each requested maturity."""

    maturities: tuple[float, ...]
    log_return: np.ndarray  # (len(maturities), paths)
    int_var: np.ndarray
    x_T: np.ndarray
    antithetic: bool

    def index(self, T: float) -> int:
        for i, t in enumerate(self.maturities):
            if abs(t - T) <= 1e-12 * max(1.0, T):
                return i
        raise InputError(f"maturity {T!r} was not simulated")


def model_vol(model: ModelSpec) -> VolFn:
    coeffs = np.asarray(model.p.coeffs, dtype=float)[::-1]

    def vol(t: float, x: np.ndarray) -> np.ndarray:
        return float(g0_fn(model, t)) * np.polyval(coeffs, x)

    return vol


def exact_bergomi_vol(model: ModelSpec, eta: float) -> VolFn:
    """sigma_t = sqrt(xi0(t)) exp(eta X_t / 2 - eta^2 Var(X_t) / 4), the untruncated exponential."""
    if model.xi0 is None:
        raise InputError("exact Bergomi volatility needs a xi0 curve")

    def vol(t: float, x: np.ndarray) -> np.ndarray:
        _, var = ou_mean_var(model.ou, t)
        return math.sqrt(float(model.xi0(t))) * np.exp(0.5 * eta * x - 0.25 * eta * eta * float(var))

    return vol


def _grid(maturities: tuple[float, ...], steps: int) -> tuple[float, int, dict[int, int]]:
    Tmax = max(maturities)
    n = max(1, int(round(steps * Tmax)))
    d = Tmax / n
    marks: dict[int, int] = {}
    for i, T in enumerate(maturities):
        k = int(round(T / d))
        if k < 1 or abs(k * d - T) > 1e-9 * max(1.0, T):
            raise InputError(f"maturity {T!r} is not on the simulation grid (step {d!r})")
        marks.setdefault(k, i)
    return d, n, marks


def _simulate_block(model: ModelSpec, vol: VolFn, d: float, n: int, marks: dict[int, int],
                    m: int, size: int, antithetic: bool, key: tuple[int, int]):
    rng = np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))
    a, b, c = model.ou.a, model.ou.b, model.ou.c
    rho = model.rho
    if b == 0:
        drift_x, e, vx, cov = a * d, 1.0, c * c * d, c * d
    else:
        e = math.exp(b * d)
        drift_x = a * math.expm1(b * d) / b
        vx = c * c * math.expm1(2 * b * d) / (2 * b)
        cov = c * math.expm1(b * d) / b  # Cov(OU innovation, W increment)
    sx = math.sqrt(vx)
    beta = cov / sx
    sw = math.sqrt(max(d - beta * beta, 0.0))
    sperp = math.sqrt(max(1.0 - rho * rho, 0.0) * d)
    half = size // 2 if antithetic else size
    x = np.full(size, model.ou.x0)
    ls = np.zeros(size)
    iv = np.zeros(size)
    out_l = np.empty((m, size))
    out_v = np.empty((m, size))
    out_x = np.empty((m, size))
    for i in range(n):
        z = rng.standard_normal((3, half))
        if antithetic:
            z = np.concatenate([z, -z], axis=1)
        sig = vol(i * d, x)
        dw = beta * z[0] + sw * z[1]
        ls += -0.5 * sig * sig * d + sig * (rho * dw + sperp * z[2])
        iv += sig * sig * d
        x = e * x + drift_x + sx * z[0]
        j = marks.get(i + 1)
        if j is not None:
            out_l[j], out_v[j], out_x[j] = ls, iv, x
    return out_l, out_v, out_x


def simulate(model: ModelSpec, maturities, mc: McConfig, vol: VolFn | None = None) -> PathStats:
    """Simulate all maturities on one path set with step T_max / round(steps T_max)."""
    mats = tuple(float(t) for t in np.atleast_1d(maturities))
    if not mats or min(mats) <= 0:
        raise InputError("maturities must be > 0")
    d, n, marks = _grid(mats, mc.steps)
    vol = vol or model_vol(model)
    m = len(mats)
    sizes = [min(BLOCK, mc.paths - s) for s in range(0, mc.paths, BLOCK)]

    def run(j: int):
        return _simulate_block(model, vol, d, n, marks, m, sizes[j], mc.antithetic, (mc.seed, j))

    if mc.threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=mc.threads) as ex:
            blocks = list(ex.map(run, range(len(sizes))))
    else:
        blocks = [run(j) for j in range(len(sizes))]
    l, v, x = (np.concatenate([blk[i] for blk in blocks], axis=1) for i in range(3))
    # maturities sharing a grid point share the snapshot
    for i, T in enumerate(mats):
        k = marks[int(round(T / d))]
        if k != i:
            l[i], v[i], x[i] = l[k], v[k], x[k]
    return PathStats(mats, l, v, x, mc.antithetic)


def simulate_terminal(model: ModelSpec, T: float, mc: McConfig, vol: VolFn | None = None):
    """Per-path (log S_T / S_0, int_0^T sigma^2 dt, X_T)."""
    st = simulate(model, [T], mc, vol)
    return st.log_return[0], st.int_var[0], st.x_T[0]


def mean_stderr(samples: np.ndarray, antithetic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error along the last axis; antithetic pairs are averaged first."""
    a = np.asarray(samples)
    if antithetic:
        a = _pair_means(a)
    n = a.shape[-1]
    return a.mean(axis=-1), a.std(axis=-1, ddof=1) / math.sqrt(n)


def _pair_means(a: np.ndarray) -> np.ndarray:
    # each block stores its draws as [z, -z] halves
    pieces = []
    start = 0
    total = a.shape[-1]
    while start < total:
        size = min(BLOCK, total - start)
        blk = a[..., start:start + size]
        half = size // 2
        pieces.append(0.5 * (blk[..., :half] + blk[..., half:]))
        start += size
    return np.concatenate(pieces, axis=-1)


def mc_calls(stats: PathStats, T: float, strikes, spot: float) -> tuple[np.ndarray, np.ndarray]:
    i = stats.index(T)
    ST = spot * np.exp(stats.log_return[i])
    K = np.atleast_1d(np.asarray(strikes, dtype=float))
    pay = np.maximum(ST[None, :] - K[:, None], 0.0)
    return mean_stderr(pay, stats.antithetic)


def mc_call(model: ModelSpec, K: float, T: float, mc: McConfig, vol: VolFn | None = None) -> tuple[float, float]:
    price, se = mc_calls(simulate(model, [T], mc, vol), T, [K], model.spot)
    return float(price[0]), float(se[0])


def mc_volswap(model: ModelSpec, T: float, mc: McConfig, vol: VolFn | None = None,
               stats: PathStats | None = None) -> tuple[float, float]:
    st = stats or simulate(model, [T], mc, vol)
    rate, se = mean_stderr(np.sqrt(st.int_var[st.index(T)] / T), st.antithetic)
    return float(rate), float(se)


def mc_charfn(stats: PathStats, T: float, u: complex) -> tuple[complex, float]:
    """E[exp(i u log(S_T/S_0))] with the larger of the real and imaginary standard errors."""
    vals = np.exp(1j * complex(u) * stats.log_return[stats.index(T)])
    mr, sr = mean_stderr(vals.real, stats.antithetic)
    mi, si = mean_stderr(vals.imag, stats.antithetic)
    return complex(mr, mi), float(max(sr, si))


def mc_laplace(stats: PathStats, T: float, u: float) -> tuple[float, float]:
    """E[exp(-(u/T) int_0^T sigma^2 dt)]."""
    m, s = mean_stderr(np.exp(-(u / T) * stats.int_var[stats.index(T)]), stats.antithetic)
    return float(m), float(s)
