"""Gaussian law of the OU driver, forward-variance curves and the g0 normalization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from .errors import InputError, NumericalError

if TYPE_CHECKING:
    from .models import ModelSpec

_SMALL = 1e-8


@dataclass(frozen=True)
class OUParams:
    """dX = (a + b X) dt + c dW, X_0 = x0."""

    a: float
    b: float
    c: float
    x0: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.a, self.b, self.c, self.x0)
        if not all(np.isfinite(vals)):
            raise InputError("OU parameters must be finite")
        if self.c == 0:
            raise InputError("OU diffusion c must be nonzero")
        for name, v in zip(("a", "b", "c", "x0"), vals):
            object.__setattr__(self, name, float(v))


@dataclass(frozen=True)
class ForwardVarianceCurve:
    """Forward variance xi0(t) in variance units.

    kind "flat" uses ``level``; "parametric" uses V0 e^{-kt} + Vinf (1 - e^{-kt});
    "piecewise" holds right-continuous levels ``values[i]`` on [times[i], times[i+1]).
    """

    kind: Literal["flat", "parametric", "piecewise"]
    level: float = 0.0
    V0: float = 0.0
    k: float = 0.0
    Vinf: float = 0.0
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "flat":
            if not (np.isfinite(self.level) and self.level >= 0):
                raise InputError("flat forward variance must be finite and >= 0")
        elif self.kind == "parametric":
            if min(self.V0, self.Vinf) < 0 or not np.isfinite([self.V0, self.k, self.Vinf]).all():
                raise InputError("parametric curve needs V0, Vinf >= 0 and finite k")
        elif self.kind == "piecewise":
            t = tuple(float(x) for x in self.times)
            v = tuple(float(x) for x in self.values)
            if not t or len(t) != len(v):
                raise InputError("piecewise curve needs matching non-empty knots")
            if t[0] != 0.0 or any(b <= a for a, b in zip(t, t[1:])):
                raise InputError("piecewise knots must start at 0 and increase")
            if min(v) < 0:
                raise InputError("piecewise forward variance must be >= 0")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
        else:
            raise InputError(f"unknown forward variance kind {self.kind!r}")

    @classmethod
    def flat(cls, v: float) -> "ForwardVarianceCurve":
        return cls("flat", level=float(v))

    @classmethod
    def parametric(cls, V0: float, k: float, Vinf: float) -> "ForwardVarianceCurve":
        return cls("parametric", V0=float(V0), k=float(k), Vinf=float(Vinf))

    @classmethod
    def piecewise(cls, knots) -> "ForwardVarianceCurve":
        t, v = zip(*[(float(a), float(b)) for a, b in knots])
        return cls("piecewise", times=t, values=v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "flat":
            out = np.full_like(t, self.level)
        elif self.kind == "parametric":
            e = np.exp(-self.k * t)
            out = self.V0 * e + self.Vinf * (1.0 - e)
        else:
            idx = np.searchsorted(self.times, t, side="right") - 1
            out = np.asarray(self.values)[np.clip(idx, 0, None)]
        return out[()] if out.ndim == 0 else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "parametric":
            out = (self.Vinf - self.V0) * self.k * np.exp(-self.k * t)
        else:
            out = np.zeros_like(t)
        return out[()] if out.ndim == 0 else out

    def integral(self, t0: float, t1: float) -> float:
        """Exact int_{t0}^{t1} xi0(s) ds."""
        if self.kind == "flat":
            return self.level * (t1 - t0)
        if self.kind == "parametric":
            if abs(self.k) < _SMALL:
                return self.V0 * (t1 - t0)
            e0, e1 = np.exp(-self.k * t0), np.exp(-self.k * t1)
            return float(self.Vinf * (t1 - t0) + (self.V0 - self.Vinf) * (e0 - e1) / self.k)
        edges = np.concatenate([self.times, [np.inf]])
        total = 0.0
        for lo, hi, v in zip(edges[:-1], edges[1:], self.values):
            a, b = max(lo, t0), min(hi, t1)
            if b > a:
                total += v * (b - a)
        return total


@dataclass(frozen=True)
class G0Table:
    """User-supplied g0 for raw mode: piecewise-linear in t, flat beyond the ends."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        t = tuple(float(x) for x in self.times)
        v = tuple(float(x) for x in self.values)
        if not t or len(t) != len(v) or any(b <= a for a, b in zip(t, t[1:])):
            raise InputError("g0 table needs increasing times and matching values")
        if not np.isfinite(v).all() or min(v) < 0:
            raise InputError("g0 table values must be finite and >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, v: float) -> "G0Table":
        return cls((0.0,), (float(v),))

    def __call__(self, t):
        out = np.interp(np.asarray(t, dtype=float), self.times, self.values)
        return out[()] if np.ndim(out) == 0 else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if len(self.times) == 1:
            return np.zeros_like(t)[()] if t.ndim == 0 else np.zeros_like(t)
        slopes = np.diff(self.values) / np.diff(self.times)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(slopes))
        out = np.where(inside, slopes[np.clip(idx, 0, len(slopes) - 1)], 0.0)
        return out[()] if out.ndim == 0 else out


def _expm1_ratio(x):
    """(e^x - 1)/x with the removable singularity at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


def conditional_law(params: OUParams, s, t, y):
    """Mean and variance of X_t given X_s = y."""
    h = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    if np.any(h < 0):
        raise InputError("conditional_law requires s <= t")
    b = params.b
    mean = np.exp(b * h) * y + params.a * h * _expm1_ratio(b * h)
    var = params.c ** 2 * h * _expm1_ratio(2 * b * h)
    mean, var = np.asarray(mean), np.asarray(var)
    return (mean[()] if mean.ndim == 0 else mean), (var[()] if var.ndim == 0 else var)


def ou_mean_var(params: OUParams, t):
    if np.any(np.asarray(t) < 0):
        raise InputError("t must be >= 0")
    return conditional_law(params, 0.0, t, params.x0)


def gaussian_moments(mean, var, n: int) -> np.ndarray:
    """Raw moments M_0..M_n of N(mean, var); broadcasts over array inputs (axis 0 = order)."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise InputError("variance must be >= 0")
    if n < 0:
        raise InputError("n must be >= 0")
    shape = np.broadcast(mean, var).shape
    out = np.empty((n + 1,) + shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = mean
    for k in range(2, n + 1):
        out[k] = mean * out[k - 1] + (k - 1) * var * out[k - 2]
    return out


def _pp(model: "ModelSpec") -> np.ndarray:
    return np.convolve(model.p.array(), model.p.array())


def expected_p_squared(model: "ModelSpec", t):
    """E[p(X_t)^2] by exact Gaussian moments."""
    mean, var = ou_mean_var(model.ou, t)
    pp = _pp(model)
    val = np.tensordot(pp, gaussian_moments(mean, var, pp.size - 1), axes=1)
    if np.any(val <= 0):
        raise NumericalError("E[p^2(X_t)] is not positive")
    return val[()] if np.ndim(val) == 0 else val


def _expected_p_squared_dt(model: "ModelSpec", t):
    mean, var = ou_mean_var(model.ou, t)
    pp = _pp(model)
    n = pp.size - 1
    m = gaussian_moments(mean, var, n)
    dmean = model.ou.b * mean + model.ou.a
    dvar = 2 * model.ou.b * var + model.ou.c ** 2
    total = np.zeros_like(np.asarray(mean, dtype=float))
    for k in range(1, n + 1):
        dk = k * m[k - 1] * dmean
        if k >= 2:
            dk = dk + 0.5 * k * (k - 1) * m[k - 2] * dvar
        total = total + pp[k] * dk
    return total


def g0(model: "ModelSpec", t):
    """Deterministic scale g0(t); sqrt(xi0/E[p^2]) unless the model carries a raw table."""
    if model.g0_table is not None:
        return model.g0_table(t)
    return np.sqrt(model.xi0(t) / expected_p_squared(model, t))


def g0_prime(model: "ModelSpec", t):
    """Time derivative of g0, analytic through the moment recursion."""
    if model.g0_table is not None:
        return model.g0_table.derivative(t)
    xi = np.asarray(model.xi0(t), dtype=float)
    dxi = np.asarray(model.xi0.derivative(t), dtype=float)
    e = np.asarray(expected_p_squared(model, t), dtype=float)
    de = np.asarray(_expected_p_squared_dt(model, t), dtype=float)
    g = np.sqrt(xi / e)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(g > 0, (dxi / e - xi * de / e ** 2) / (2 * np.where(g > 0, g, 1.0)), 0.0)
    return out[()] if out.ndim == 0 else out


def mean_variance(model: "ModelSpec", T: float) -> float:
    """(1/T) int_0^T E[sigma_s^2] ds."""
    if model.g0_table is None:
        return model.xi0.integral(0.0, T) / T
    x, w = np.polynomial.legendre.leggauss(64)
    s = 0.5 * T * (x + 1.0)
    vals = np.asarray(model.g0_table(s)) ** 2 * expected_p_squared(model, s)
    return float(0.5 * np.dot(w, vals))
