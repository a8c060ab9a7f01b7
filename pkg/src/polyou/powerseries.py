"""Truncated real power series and the coefficient algebra built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import InputError

if TYPE_CHECKING:
    from .models import ModelSpec


@dataclass(frozen=True)
class PowerSeries:
    """p(x) = sum_k coeffs[k] x**k, stored densely as an immutable tuple."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.coeffs)
        if len(c) == 0:
            raise InputError("power series needs at least one coefficient")
        if not all(np.isfinite(c)):
            raise InputError("power series coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "PowerSeries":
        """Build from sparse (index, coefficient) pairs."""
        pairs = [(int(k), float(v)) for k, v in pairs]
        if not pairs:
            raise InputError("empty coefficient list")
        if min(k for k, _ in pairs) < 0:
            raise InputError("negative power index")
        out = np.zeros(max(k for k, _ in pairs) + 1)
        for k, v in pairs:
            out[k] += v
        return cls(tuple(out))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def array(self, length: int | None = None) -> np.ndarray:
        """Coefficients as a float array, truncated or zero-padded to ``length``."""
        a = np.asarray(self.coeffs, dtype=float)
        if length is None:
            return a
        out = np.zeros(length)
        m = min(length, a.size)
        out[:m] = a[:m]
        return out

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __call__(self, x):
        return evaluate(self, x)


def convolve(p: PowerSeries, q: PowerSeries, trunc: int) -> PowerSeries:
    """Cauchy product truncated to degree ``trunc`` (zero-padded to length trunc+1)."""
    if trunc < 0:
        raise InputError("trunc must be >= 0")
    full = np.convolve(p.array(), q.array())
    return PowerSeries(tuple(_fit(full, trunc + 1)))


def derivative(p: PowerSeries) -> PowerSeries:
    a = p.array()
    if a.size == 1:
        return PowerSeries((0.0,))
    return PowerSeries(tuple(a[1:] * np.arange(1, a.size)))


def antiderivative(p: PowerSeries) -> PowerSeries:
    """Primitive vanishing at zero."""
    a = p.array()
    return PowerSeries((0.0,) + tuple(a / np.arange(1, a.size + 1)))


def evaluate(p: PowerSeries, x):
    """Horner evaluation; works for real or complex scalars and arrays."""
    acc = np.zeros_like(np.asarray(x), dtype=np.result_type(x, float))
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc[()] if acc.ndim == 0 else acc


def double_factorial_diagnostic(p: PowerSeries, kmin: int = 1) -> list[float]:
    """(|p_k| (k-1)!!)^(1/k) for k = kmin..degree, computed in log space."""
    if kmin < 1:
        raise InputError("kmin must be >= 1")
    out = []
    for k in range(kmin, p.degree + 1):
        c = abs(p.coeffs[k])
        if c == 0.0:
            out.append(0.0)
            continue
        out.append(float(np.exp((np.log(c) + _log_double_factorial(k - 1)) / k)))
    return out


def romano_touzi_series(model: "ModelSpec") -> tuple[PowerSeries, PowerSeries, PowerSeries, PowerSeries]:
    """Series (p1, p2, p3, q) = (p*p, r1, -r2, r2) feeding the jump-discretized system.

    r1(x) = -((a + b x) p(x) + c^2 p'(x) / 2) / c and r2(x) = (1/c) * int_0^x p.
    """
    a, b, c = model.ou.a, model.ou.b, model.ou.c
    if c == 0:
        raise InputError("c must be nonzero")
    p = model.p.array()
    d = p.size
    dp = derivative(model.p).array(d + 1)
    drift = np.zeros(d + 1)
    drift[:d] += a * p
    drift[1:] += b * p
    r1 = -(drift + 0.5 * c * c * dp) / c
    r2 = antiderivative(model.p).array() / c
    p1 = convolve(model.p, model.p, 2 * model.p.degree)
    return p1, PowerSeries(tuple(r1)), PowerSeries(tuple(-r2)), PowerSeries(tuple(r2))


def _fit(a: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length)
    m = min(length, a.size)
    out[:m] = a[:m]
    return out


def _log_double_factorial(m: int) -> float:
    # m!! with (-1)!! = 0!! = 1
    if m <= 0:
        return 0.0
    return float(np.sum(np.log(np.arange(m, 0, -2, dtype=float))))
