"""Gauss-Laguerre, Gauss-Legendre and Gauss-Hermite rules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..errors import InputError


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    kind: Literal["gauss-laguerre", "gauss-legendre", "gauss-hermite"]
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.nodes.shape != self.weights.shape:
            raise InputError("nodes and weights must have equal length")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.size

    def scaled(self, s: float) -> "QuadratureRule":
        """Rule for int_0^inf f after the change of variable u = s x."""
        return QuadratureRule(self.kind, self.nodes * s, self.weights * s)


def gauss_laguerre(n: int) -> QuadratureRule:
    """n-point rule with the e^{-x} weight folded in: sum w_i f(x_i) ~ int_0^inf f."""
    if not 1 <= n <= 256:
        raise InputError("gauss_laguerre supports 1 <= n <= 256")
    x, w = _laguerre(int(n))
    return QuadratureRule("gauss-laguerre", x.copy(), w.copy())


@lru_cache(maxsize=32)
def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(n, dtype=float)
    x = eigh_tridiagonal(2 * k + 1, np.arange(1, n, dtype=float), eigvals_only=True)
    for _ in range(2):
        ln, lm = _laguerre_pair(x, n)
        x = x - ln / (n * (ln - lm) / x)
    ln1, _ = _laguerre_pair(x, n + 1)
    # folded weights x / ((n+1) L_{n+1}(x))^2 * e^x, evaluated in log space
    w = np.exp(np.log(x) - 2 * np.log((n + 1) * np.abs(ln1)) + x)
    return x, w


def _laguerre_pair(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(L_n(x), L_{n-1}(x)) by the three-term recurrence."""
    prev, cur = np.ones_like(x), 1.0 - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 - x) * cur - j * prev) / (j + 1)
    return cur, prev


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    if n < 1:
        raise InputError("n must be >= 1")
    x, w = np.polynomial.legendre.leggauss(int(n))
    h = 0.5 * (b - a)
    return QuadratureRule("gauss-legendre", a + h * (x + 1.0), h * w)


def gauss_hermite(n: int) -> QuadratureRule:
    """Nodes/weights for E[f(Z)], Z standard normal; weights sum to one."""
    if n < 1:
        raise InputError("n must be >= 1")
    x, w = np.polynomial.hermite_e.hermegauss(int(n))
    return QuadratureRule("gauss-hermite", x, w / w.sum())
