"""Acceptance suite: one function per criterion, each returning a CriterionResult.

The fast level runs the deterministic oracle checks; the full level adds the
Monte Carlo bands and the calibration round trip.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .calibration import (CalibrationProblem, FreeParam, OptimizerConfig, Quote, QuoteSet, calibrate,
                          synthetic_quotes)
from .errors import PolyOUError
from .models import ModelSpec, bergomi_truncated, deterministic_vol, quintic_ou, stein_stein
from .montecarlo import McConfig, exact_bergomi_vol, mc_calls, mc_volswap, simulate
from .oulaw import ForwardVarianceCurve, G0Table, OUParams, ou_mean_var
from .powerseries import PowerSeries
from .pricing.blackscholes import bs_call, implied_vols
from .pricing.lewis import lewis_calls
from .pricing.quadrature import gauss_hermite
from .pricing.volswap import vol_swap
from .riccati import CoefficientSchedule, RiccatiConfig, solve, solve_discretized
from .transforms import cf_values, desk_config, laplace_values
from .vix import VIX_WINDOW, vix_future, vix_option, vix_squared_poly

SPOT = 100.0
SMILE_MATURITIES = (0.1, 0.25, 0.5, 1.0)
SMILE_LOG_MONEYNESS = tuple(np.linspace(-0.3, 0.15, 9))
VOLSWAP_MATURITIES = (0.25, 0.5, 1.0, 2.0)
MC_SEED = 20240501


@dataclass(frozen=True)
class CriterionResult:
    cid: int
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return (f"criterion {self.cid:2d} {'PASS' if self.passed else 'FAIL'}  {self.name}: "
                f"metric={self.metric:.3e} threshold={self.threshold:.3e} ({self.seconds:.1f}s) {self.detail}")


def quintic_reference(xi0=0.025, spot: float = SPOT) -> ModelSpec:
    return quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227, xi0=xi0, spot=spot)


def bergomi_reference(xi0=0.025, spot: float = SPOT) -> ModelSpec:
    return bergomi_truncated(-0.7, -0.7, 1 / 52, 1.2, 8, xi0=xi0, spot=spot)


def stein_stein_test() -> ModelSpec:
    return stein_stein(-0.5, 0.05, -1.0, 0.5, 0.2)


# --- criterion 1 -----------------------------------------------------------------

def quartic_oracle(t: float) -> float:
    """E[exp(-W_t^4 / 24)] by 200-point Gauss-Hermite."""
    rule = gauss_hermite(200)
    x = np.asarray(rule.nodes)
    return float(np.dot(rule.weights, np.exp(-(x ** 4) * t * t / 24.0)))


def quartic_errors(M: int, k_max: int = 15, n: int = 100, times=None) -> np.ndarray:
    model = ModelSpec(ou=OUParams(0.0, 0.0, 1.0, 0.0), p=PowerSeries((1.0,)), rho=0.0, xi0=None,
                      g0_table=G0Table.constant(1.0))
    times = np.round(np.arange(1, 11) * 0.2, 10) if times is None else times
    psi0 = np.zeros(M + 1, dtype=complex)
    psi0[4] = -1.0 / 24.0
    errs = []
    for t in times:
        sol = solve(model, CoefficientSchedule.constant(0, 0, float(t)), RiccatiConfig(M=M, n=n, k_max=k_max), psi0)
        val = math.exp(sol.final[0].real)
        ref = quartic_oracle(float(t))
        errs.append(abs(val - ref) / ref)
    return np.array(errs)


def criterion_1(k_max: int = 15, threads: int = 1) -> CriterionResult:
    try:
        err20 = quartic_errors(20, k_max)
        worst = [float(np.max(quartic_errors(M, k_max))) for M in (5, 10, 15, 20)]
    except PolyOUError as exc:
        return CriterionResult(1, "Brownian quartic", False, math.inf, 1e-3, f"solver error: {exc}")
    mono = all(b <= a * (1 + 1e-12) for a, b in zip(worst, worst[1:]))
    peak = float(np.max(err20))
    detail = "max rel err by M=5,10,15,20: " + ",".join(f"{w:.2e}" for w in worst)
    return CriterionResult(1, "Brownian quartic", peak < 1e-3 and mono, peak, 1e-3,
                           detail + ("" if mono else " (not monotone in M)"))


# --- criterion 2 -----------------------------------------------------------------

def stein_stein_oracle(model: ModelSpec, u: float, T: float) -> complex:
    """exp(psi0 + psi1 x0 + psi2 x0^2) from the closed three-dimensional system."""
    a, b, c, rho = model.ou.a, model.ou.b, model.ou.c, model.rho
    g1, g2 = 1j * u, 0.0
    g0 = float(model.g0_table(0.0))

    def f(_, y):
        p0, p1, p2 = y
        return [a * p1 + c * c * p2 + 0.5 * c * c * p1 * p1,
                b * p1 + 2 * a * p2 + 2 * c * c * p1 * p2 + rho * g1 * c * g0 * p1,
                (g2 + 0.5 * g1 * (g1 - 1)) * g0 * g0 + 2 * b * p2 + 2 * c * c * p2 * p2 + 2 * rho * g1 * c * g0 * p2]

    sol = solve_ivp(f, (0.0, T), np.zeros(3, dtype=complex), method="DOP853", rtol=1e-13, atol=1e-15)
    p0, p1, p2 = sol.y[:, -1]
    x0 = model.ou.x0
    return complex(np.exp(p0 + p1 * x0 + p2 * x0 * x0))


def criterion_2(threads: int = 1) -> CriterionResult:
    model = stein_stein_test()
    worst = 0.0
    for T in (0.25, 1.0):
        us = np.array([0.5, 1.0, 2.0, 5.0])
        vals = cf_values(model, us, T, RiccatiConfig(M=6, n=400), threads=threads)
        for u, v in zip(us, vals):
            worst = max(worst, abs(v - stein_stein_oracle(model, float(u), T)))
    return CriterionResult(2, "Stein-Stein equivalence", worst < 1e-5, worst, 1e-5, "M=6, n=400")


# --- criterion 3 -----------------------------------------------------------------

def criterion_3(threads: int = 1) -> CriterionResult:
    worst = 0.0
    K = SPOT * np.exp(np.linspace(-0.5, 0.5, 11))
    for T in (0.25, 1.0):
        model = deterministic_vol(0.04, spot=SPOT)
        # constant p has no boundary layer, so the default uniform grid suffices
        prices = lewis_calls(model, K, T, cfg=RiccatiConfig(), threads=threads)
        worst = max(worst, float(np.max(np.abs(prices - bs_call(SPOT, K, T, 0.2)))))
    return CriterionResult(3, "Black-Scholes degeneracy", worst < 1e-6, worst, 1e-6, "11 strikes, T=0.25,1")


# --- criterion 4 -----------------------------------------------------------------

def criterion_4(threads: int = 1) -> CriterionResult:
    cfg = RiccatiConfig(M=32, n=400)
    worst = 0.0
    exact = True
    for model in (quintic_reference(), bergomi_reference(), stein_stein_test()):
        for T in (0.5, 1.0):
            vals = cf_values(model, [0.0, -1j], T, cfg, threads=threads)
            exact &= vals[0] == 1.0
            worst = max(worst, abs(vals[1] - 1.0))
    return CriterionResult(4, "martingality and normalization", exact and worst < 1e-6, worst, 1e-6,
                           "phi(0)=1 exact" if exact else "phi(0) differs from 1")


# --- criteria 5, 6 ---------------------------------------------------------------

def smile_band_check(model: ModelSpec, mc_vol=None, mc: McConfig | None = None, cfg: RiccatiConfig | None = None,
                     threads: int = 1):
    """Rows (T, log-moneyness, fourier iv, mc lo, mc hi, inside) over the acceptance grid."""
    mc = mc or McConfig(paths=100_000, steps=2000, seed=MC_SEED, threads=threads)
    stats = simulate(model, SMILE_MATURITIES, mc, vol=mc_vol)
    k = np.array(SMILE_LOG_MONEYNESS)
    K = SPOT * np.exp(k)
    rows = []
    for T in SMILE_MATURITIES:
        iv = implied_vols(lewis_calls(model, K, T, cfg=cfg, threads=threads), SPOT, K, T)
        p, se = mc_calls(stats, T, K, SPOT)
        lo = implied_vols(p - 1.96 * se, SPOT, K, T)
        hi = implied_vols(p + 1.96 * se, SPOT, K, T)
        lo = np.where(np.isnan(lo), 0.0, lo)
        for j in range(k.size):
            rows.append((T, float(k[j]), float(iv[j]), float(lo[j]), float(hi[j]),
                         bool(lo[j] <= iv[j] <= hi[j])))
    return rows


def _band_result(cid: int, name: str, rows) -> CriterionResult:
    miss = [r for r in rows if not r[5]]
    excess = max((max(r[3] - r[2], r[2] - r[4]) for r in miss), default=0.0)
    detail = f"{len(rows) - len(miss)}/{len(rows)} inside"
    if miss:
        detail += "; outside: " + "; ".join(f"T={r[0]:g} k={r[1]:+.4f} iv={r[2]:.4f} [{r[3]:.4f},{r[4]:.4f}]"
                                            for r in miss)
    return CriterionResult(cid, name, not miss, excess, 0.0, detail)


def criterion_5(threads: int = 1) -> CriterionResult:
    return _band_result(5, "quintic smile vs MC", smile_band_check(quintic_reference(), threads=threads))


def criterion_6(threads: int = 1) -> CriterionResult:
    model = bergomi_reference()
    return _band_result(6, "Bergomi smile vs exact Bergomi MC",
                        smile_band_check(model, mc_vol=exact_bergomi_vol(model, 1.2), threads=threads))


# --- criterion 7 -----------------------------------------------------------------

def criterion_7(threads: int = 1) -> CriterionResult:
    xi = ForwardVarianceCurve.parametric(0.025, 5.0, 0.06)
    rows = []
    for model in (quintic_reference(xi), bergomi_reference(xi)):
        mc = McConfig(paths=100_000, steps=2000, seed=MC_SEED, threads=threads)
        stats = simulate(model, VOLSWAP_MATURITIES, mc)
        for T in VOLSWAP_MATURITIES:
            k = vol_swap(model, T, cfg=desk_config(), threads=threads)
            r, se = mc_volswap(model, T, mc, stats=stats)
            rows.append((model.family, T, k, r - 1.96 * se, r + 1.96 * se))
    miss = [r for r in rows if not r[3] <= r[2] <= r[4]]
    excess = max((max(r[3] - r[2], r[2] - r[4]) for r in miss), default=0.0)
    detail = f"{len(rows) - len(miss)}/{len(rows)} inside"
    if miss:
        detail += "; outside: " + "; ".join(f"{r[0]} T={r[1]:g} rate={r[2]:.5f} [{r[3]:.5f},{r[4]:.5f}]"
                                            for r in miss)
    return CriterionResult(7, "volatility swap vs MC", not miss, excess, 0.0, detail)


# --- criterion 8 -----------------------------------------------------------------

def discretized_errors(model: ModelSpec, u: float, T: float, ns=(64, 128, 256, 512),
                       cfg: RiccatiConfig | None = None) -> np.ndarray:
    cfg = cfg or desk_config()
    ref = cf_values(model, [u], T, cfg)[0]
    errs = []
    for n in ns:
        sol = solve_discretized(model, CoefficientSchedule.constant(1j * u, 0, T), cfg, n)
        errs.append(abs(np.exp(sol.final[0]) - ref))
    return np.array(errs)


def criterion_8(threads: int = 1) -> CriterionResult:
    model = quintic_reference()
    worst = 0.0
    mono = True
    parts = []
    for u in (1.0, 3.0):
        e = discretized_errors(model, u, 0.25)
        mono &= bool(np.all(np.diff(e) < 0))
        worst = max(worst, float(e[-1]))
        parts.append(f"u={u:g}: " + ",".join(f"{x:.2e}" for x in e))
    return CriterionResult(8, "discretized Riccati cross-check", mono and worst < 1e-3, worst, 1e-3,
                           "; ".join(parts) + ("" if mono else " (not decreasing)"))


# --- criterion 9 -----------------------------------------------------------------

def criterion_9(threads: int = 1) -> CriterionResult:
    us = np.array([0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
    lap_u = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
    worst_mod = 0.0
    ok = True
    notes = []
    xi = ForwardVarianceCurve.parametric(0.025, 5.0, 0.06)
    for model in (quintic_reference(), bergomi_reference(), stein_stein_test()):
        for T in (0.25, 1.0):
            mod = np.abs(cf_values(model, us, T, RiccatiConfig(M=32, n=400), threads=threads))
            worst_mod = max(worst_mod, float(np.max(mod)) - 1.0)
            lap = laplace_values(model, lap_u, T, RiccatiConfig(M=32, n=400), threads=threads)
            if not (np.all(lap > 0) and np.all(lap <= 1) and np.all(np.diff(lap) <= 1e-12)):
                ok = False
                notes.append(f"Laplace not in (0,1] or increasing for {model.family} T={T:g}")
    for model in (quintic_reference(xi), bergomi_reference(xi)):
        for T in (0.5, 1.0):
            k = vol_swap(model, T, threads=threads)
            bound = math.sqrt(xi.integral(0.0, T) / T)
            if k > bound + 1e-8:
                ok = False
                notes.append(f"vol swap {k:.6f} above Jensen bound {bound:.6f} for {model.family} T={T:g}")
    ok &= worst_mod <= 1e-9
    return CriterionResult(9, "modulus and positivity", ok, max(worst_mod, 0.0), 1e-9,
                           "; ".join(notes) or "all bounds hold")


# --- criterion 10 ----------------------------------------------------------------

def criterion_10(draws: int = 50_000, seed: int = MC_SEED, threads: int = 1) -> CriterionResult:
    model = quintic_reference()
    T = 1.0 / 12.0
    fut = vix_future(model, T)
    atm = vix_option(model, T, VIX_WINDOW, fut)
    poly = vix_squared_poly(model, T)
    mean, var = ou_mean_var(model.ou, T)
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = mean + math.sqrt(var) * rng.standard_normal(draws)
    vix = np.sqrt(np.maximum(poly(y), 0.0))
    pay = np.maximum(vix - fut, 0.0)
    z_f = abs(fut - vix.mean()) / (vix.std(ddof=1) / math.sqrt(draws))
    z_o = abs(atm - pay.mean()) / (pay.std(ddof=1) / math.sqrt(draws))
    z = max(z_f, z_o)
    return CriterionResult(10, "VIX future and ATM option vs MC", z < 3.0, z, 3.0,
                           f"future={fut:.6f} (z={z_f:.2f}), atm={atm:.6f} (z={z_o:.2f})")


# --- criterion 11 ----------------------------------------------------------------

CAL_TRUTH = {"rho": -0.65, "alpha": -0.6, "p0": 0.01, "p3": 0.214, "p5": 0.227}
CAL_FIXED = {"eps": 1 / 52, "p1": 1.0, "xi0": 0.025}
CAL_BOUNDS = {"rho": (-0.99, 0.0), "alpha": (-1.5, -0.05), "p0": (1e-4, 0.5), "p3": (1e-4, 2.0),
              "p5": (1e-4, 2.0)}
CAL_MATURITIES = (0.25, 0.5)


def calibration_problem(quotes: QuoteSet | None = None) -> CalibrationProblem:
    free = tuple(FreeParam(k, *v) for k, v in CAL_BOUNDS.items())
    if quotes is None:
        rows = []
        for T in CAL_MATURITIES:
            for k in np.linspace(-0.25, 0.1, 11):
                rows.append(Quote("SPX", T, float(SPOT * math.exp(k)), SPOT, 0.1, 0.1))
        quotes = QuoteSet(tuple(rows))
    return CalibrationProblem("quintic", free, dict(CAL_FIXED), quotes)


def criterion_11(max_evals: int = 2000, threads: int = 1) -> CriterionResult:
    template = calibration_problem()
    quotes = synthetic_quotes(template, CAL_TRUTH, half_spread=0.002)
    problem = calibration_problem(quotes)
    start = {k: v * 1.2 for k, v in CAL_TRUTH.items()}
    _, report = calibrate(problem, start, OptimizerConfig(max_evals=max_evals))
    rmse_bp = report.rmse * 1e4
    return CriterionResult(11, "calibration round trip", rmse_bp < 10.0 and report.evaluations <= max_evals,
                           rmse_bp, 10.0, f"{report.evaluations} evaluations, converged={report.converged}")


# --- suite -----------------------------------------------------------------------

FAST: dict[int, Callable[..., CriterionResult]] = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
                                                   8: criterion_8, 9: criterion_9}
FULL: dict[int, Callable[..., CriterionResult]] = {**FAST, 5: criterion_5, 6: criterion_6, 7: criterion_7,
                                                   10: criterion_10, 11: criterion_11}


def run_criterion(cid: int, fn: Callable[..., CriterionResult], threads: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = fn(threads=threads)
    except PolyOUError as exc:
        res = CriterionResult(cid, getattr(fn, "__name__", f"criterion_{cid}"), False, math.inf, math.nan, f"error: {type(exc).__name__}: {exc}")
    return replace(res, seconds=time.perf_counter() - t0)


def run_suite(level: str = "fast", overrides: dict[int, Callable[..., CriterionResult]] | None = None,
              threads: int = 1, progress: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    table = dict(FAST if level == "fast" else FULL)
    table.update(overrides or {})
    out = []
    for cid in sorted(table):
        res = run_criterion(cid, table[cid], threads)
        out.append(res)
        if progress:
            progress(res)
    return out


def results_csv(results: list[CriterionResult]) -> str:
    """Machine-readable results; timings are left out so the file is reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "name", "passed", "metric", "threshold", "detail"])
    for r in results:
        w.writerow([r.cid, r.name, "true" if r.passed else "false", f"{r.metric:.6e}", f"{r.threshold:.6e}",
                    r.detail])
    return buf.getvalue()
