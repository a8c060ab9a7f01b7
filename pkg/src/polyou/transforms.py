"""Characteristic function of the log-return and Laplace transform of integrated variance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NonFinite, NonReal, NumericalError, Overflow, SingularJ
from .models import ModelSpec
from .riccati import RiccatiConfig, solve_batch

LAPLACE_IMAG_TOL = 1e-8
MODULUS_TOL = 1e-9


@dataclass(frozen=True)
class CharFnSample:
    u: complex
    value: complex
    T: float


def default_config() -> RiccatiConfig:
    return RiccatiConfig(M=32, n=None, k_max=15)


def desk_config() -> RiccatiConfig:
    """Pricing grid: 1600 steps per year, last 0.02 years of solver time 16x finer.

    Near calendar time 0 the normalization g0 is large when p(X_0) is small, and a
    uniform grid leaves a first-order error concentrated there.
    """
    return RiccatiConfig(M=32, k_max=15, steps_per_year=1600.0, layer=0.02, layer_factor=16)


def _exp_at_x0(psi: np.ndarray, x0: float, strict: bool = True) -> np.ndarray:
    """exp(sum_k psi[:, k] x0^k) by Horner along the last axis."""
    acc = np.zeros(psi.shape[:-1], dtype=complex)
    for k in range(psi.shape[-1] - 1, -1, -1):
        acc = acc * x0 + psi[..., k]
    over = ~(acc.real <= 700)
    if np.any(over):
        if strict:
            raise Overflow("characteristic exponent overflows")
        acc = np.where(over, np.nan, acc)
    return np.exp(acc)


# step-count multipliers tried, in order, for nodes whose solve failed
RETRY_FACTORS = (1.2, 0.85, 1.45)


def cf_values(model: ModelSpec, us, T: float, cfg: RiccatiConfig | None = None,
              threads: int = 1, retries: int = 0) -> np.ndarray:
    """phi(u) = E[exp(i u log(S_T/S_0))] for an array of complex u.

    A node fails when its solve breaks down or, for -1 <= Im(u) <= 0, when
    |phi(u)| exceeds the bound E[(S_T/S_0)^{-Im u}] <= 1. With ``retries`` > 0
    failing nodes are re-solved with perturbed step counts before giving up.
    """
    if not T > 0:
        raise InputError("T must be > 0")
    cfg = cfg or default_config()
    us = np.atleast_1d(np.asarray(us, dtype=complex))
    out = np.ones(us.shape, dtype=complex)
    todo = np.flatnonzero(us != 0)
    attempts = [cfg] + [cfg.refined(f, T) for f in RETRY_FACTORS[:retries]]
    for attempt in attempts:
        if todo.size == 0:
            break
        psi, status, where = solve_batch(model, 1j * us[todo], 0.0, T, attempt, threads=threads,
                                         raise_errors=False)
        vals = _exp_at_x0(psi, model.ou.x0, strict=False)
        bounded = (us[todo].imag <= 0) & (us[todo].imag >= -1)
        ok = (status == 0) & np.isfinite(vals) & ~(bounded & (np.abs(vals) > 1 + MODULUS_TOL))
        out[todo[ok]] = vals[ok]
        failed = todo[~ok]
        if failed.size and attempt is attempts[-1]:
            i = int(np.flatnonzero(~ok)[0])
            detail = f"u={us[failed[0]]:.6g}"
            if status[i] == 1:
                raise SingularJ(int(where[i]), detail)
            if status[i] == 2:
                raise NonFinite(int(where[i]), detail)
            raise NumericalError(f"transform breaks its modulus bound at {detail}: |phi|={abs(vals[i]):.6g}")
        todo = failed
    return out


def cf_logreturn(model: ModelSpec, u: complex, T: float, cfg: RiccatiConfig | None = None) -> complex:
    return complex(cf_values(model, [u], T, cfg)[0])


def cf_batch(model: ModelSpec, us, T: float, cfg: RiccatiConfig | None = None,
             threads: int = 1) -> list[CharFnSample]:
    vals = cf_values(model, us, T, cfg, threads=threads)
    return [CharFnSample(complex(u), complex(v), float(T)) for u, v in zip(np.atleast_1d(us), vals)]


def laplace_values(model: ModelSpec, us, T: float, cfg: RiccatiConfig | None = None,
                   threads: int = 1, raise_errors: bool = True):
    """E[exp(-(u/T) int_0^T sigma^2 ds)] for real u >= 0.

    With ``raise_errors`` False returns (values, ok) where ok flags nodes whose
    solve succeeded with a finite value in [0, 1] and no imaginary residue.
    """
    if not T > 0:
        raise InputError("T must be > 0")
    cfg = cfg or default_config()
    us = np.atleast_1d(np.asarray(us, dtype=float))
    if np.any(us < 0):
        raise InputError("Laplace argument must be >= 0")
    out = np.ones(us.shape)
    ok = np.ones(us.shape, dtype=bool)
    work = np.flatnonzero(us > 0)
    if work.size:
        psi, status, where = solve_batch(model, np.zeros(work.size, dtype=complex), -us[work] / T + 0j, T, cfg,
                                         threads=threads, raise_errors=False)
        vals = _exp_at_x0(psi, model.ou.x0, strict=False)
        with np.errstate(invalid="ignore"):
            good = (status == 0) & np.isfinite(vals) & (vals.real >= 0) & (vals.real <= 1 + MODULUS_TOL)
            real = np.abs(vals.imag) < LAPLACE_IMAG_TOL
        if raise_errors:
            bad = ~good
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                detail = f"u={us[work[i]]:.6g}"
                if status[i] == 1:
                    raise SingularJ(int(where[i]), detail)
                if status[i] == 2:
                    raise NonFinite(int(where[i]), detail)
                if not np.isfinite(vals[i]):
                    raise Overflow(f"Laplace exponent overflows at {detail}")
                raise NumericalError(f"Laplace transform outside [0, 1] at {detail}: {vals[i].real:.6g}")
            if not real.all():
                raise NonReal("Laplace transform has an imaginary residue")
        out[work] = np.where(good, np.nan_to_num(vals.real), np.nan)
        ok[work] = good & real
    if raise_errors:
        return out
    return out, ok


def laplace_integrated_var(model: ModelSpec, u: float, T: float, cfg: RiccatiConfig | None = None) -> float:
    return float(laplace_values(model, [u], T, cfg)[0])
