"""Least-squares fit of model parameters to SPX and VIX implied-vol quotes by Nelder-Mead."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, NotConverged, PolyOUError
from .models import ModelSpec, bergomi_truncated, quintic_ou
from .oulaw import ForwardVarianceCurve
from .pricing.blackscholes import implied_vols
from .pricing.lewis import lewis_calls, lewis_rule
from .pricing.quadrature import gauss_hermite
from .riccati import RiccatiConfig
from .vix import DEFAULT_HERMITE, VIX_WINDOW, vix_future, vix_option

PENALTY = 1e4
FAMILIES = {
    "quintic": ("rho", "alpha", "eps", "p0", "p1", "p3", "p5", "xi0"),
    "bergomi": ("rho", "alpha", "eps", "eta", "N", "xi0"),
}
QUOTE_HEADER = ("instrument", "maturity", "strike", "forward", "bid_iv", "ask_iv")


def calibration_config() -> RiccatiConfig:
    """Coarser grid than the pricing default; quotes and fits share it."""
    return RiccatiConfig(M=32, k_max=15, steps_per_year=400.0, layer=0.02, layer_factor=8)


@dataclass(frozen=True)
class Quote:
    instrument: str
    maturity: float
    strike: float
    forward: float
    bid_iv: float
    ask_iv: float

    def __post_init__(self) -> None:
        if self.instrument not in ("SPX", "VIX"):
            raise InputError(f"instrument must be SPX or VIX, got {self.instrument!r}")
        for name in ("maturity", "strike", "forward"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be > 0")
        if not (math.isfinite(self.bid_iv) and math.isfinite(self.ask_iv) and self.bid_iv <= self.ask_iv):
            raise InputError("need finite bid_iv <= ask_iv")

    @property
    def mid_iv(self) -> float:
        return 0.5 * (self.bid_iv + self.ask_iv)


@dataclass(frozen=True)
class QuoteSet:
    rows: tuple[Quote, ...]

    @property
    def mids(self) -> np.ndarray:
        return np.array([q.mid_iv for q in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def from_csv_text(cls, text: str) -> "QuoteSet":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != QUOTE_HEADER:
            raise InputError(f"quote header must be {','.join(QUOTE_HEADER)}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(QUOTE_HEADER):
                raise InputError(f"quote row {i}: expected {len(QUOTE_HEADER)} fields")
            try:
                rows.append(Quote(rec[0].strip(), *(float(c) for c in rec[1:])))
            except (ValueError, InputError) as exc:
                raise InputError(f"quote row {i}: {exc}") from None
        return cls(tuple(rows))

    @classmethod
    def from_csv(cls, path: str) -> "QuoteSet":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(QUOTE_HEADER)
        for q in self.rows:
            w.writerow([q.instrument, repr(q.maturity), repr(q.strike), repr(q.forward),
                        repr(q.bid_iv), repr(q.ask_iv)])
        return buf.getvalue()


@dataclass(frozen=True)
class FreeParam:
    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise InputError(f"bounds of {self.name} must be finite with lo < hi")

    def to_theta(self, x: float) -> float:
        if not self.lo < x < self.hi:
            raise InputError(f"{self.name}={x!r} outside ({self.lo}, {self.hi})")
        return math.atanh(2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0)

    def from_theta(self, t: float) -> float:
        return self.lo + 0.5 * (self.hi - self.lo) * (1.0 + math.tanh(t))


def build_model(family: str, params: dict) -> ModelSpec:
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}")
    missing = [k for k in FAMILIES[family] if k not in params]
    if missing:
        raise InputError(f"missing parameters: {', '.join(missing)}")
    p = params
    if family == "quintic":
        return quintic_ou(p["rho"], p["alpha"], p["eps"], p["p0"], p["p1"], p["p3"], p["p5"], xi0=p["xi0"])
    return bergomi_truncated(p["rho"], p["alpha"], p["eps"], p["eta"], int(p["N"]), xi0=p["xi0"])


@dataclass(frozen=True, eq=False)
class CalibrationProblem:
    family: str
    free: tuple[FreeParam, ...]
    fixed: dict
    quotes: QuoteSet
    weights: str = "uniform"
    cfg: RiccatiConfig = field(default_factory=calibration_config)
    lewis_nodes: int = 128
    hermite_nodes: int = DEFAULT_HERMITE
    vix_delta: float = VIX_WINDOW

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}")
        if not self.free:
            raise InputError("need at least one free parameter")
        names = [f.name for f in self.free]
        allowed = set(FAMILIES[self.family]) - {"xi0", "N"}
        bad = [n for n in names if n not in allowed]
        if bad or len(set(names)) != len(names):
            raise InputError(f"invalid free parameters: {names}")
        need = set(FAMILIES[self.family]) - set(names)
        if need - set(self.fixed):
            raise InputError(f"missing fixed parameters: {sorted(need - set(self.fixed))}")
        if self.weights not in ("uniform", "inverse-spread"):
            raise InputError("weights must be uniform or inverse-spread")
        if not len(self.quotes):
            raise InputError("empty quote set")

    def params(self, theta) -> dict:
        out = dict(self.fixed)
        for f, t in zip(self.free, np.asarray(theta, dtype=float)):
            out[f.name] = f.from_theta(float(t))
        return out

    def theta(self, params: dict) -> np.ndarray:
        return np.array([f.to_theta(float(params[f.name])) for f in self.free])

    def model(self, theta) -> ModelSpec:
        return build_model(self.family, self.params(theta))

    def weight_vector(self) -> np.ndarray:
        if self.weights == "uniform":
            w = np.ones(len(self.quotes))
        else:
            spread = np.array([q.ask_iv - q.bid_iv for q in self.quotes.rows])
            if np.any(spread <= 0):
                raise InputError("inverse-spread weights need ask > bid on every quote")
            w = 1.0 / spread
        return w / w.sum()


def model_ivs(problem: CalibrationProblem, model: ModelSpec) -> np.ndarray:
    """Model implied vol for every quote; NaN where pricing fails."""
    rows = problem.quotes.rows
    out = np.full(len(rows), np.nan)
    spx: dict[tuple[float, float], list[int]] = {}
    vix: dict[float, list[int]] = {}
    for i, q in enumerate(rows):
        if q.instrument == "SPX":
            spx.setdefault((q.maturity, q.forward), []).append(i)
        else:
            vix.setdefault(q.maturity, []).append(i)
    for (T, F), idx in spx.items():
        K = np.array([rows[i].strike for i in idx])
        try:
            prices = lewis_calls(model.with_spot(F), K, T, cfg=problem.cfg, quad=lewis_rule(problem.lewis_nodes))
        except PolyOUError:
            continue
        out[idx] = implied_vols(prices, F, K, T)
    herm = gauss_hermite(problem.hermite_nodes)
    for T, idx in vix.items():
        K = np.array([rows[i].strike for i in idx])
        try:
            fut = vix_future(model, T, problem.vix_delta, herm)
            prices = vix_option(model, T, problem.vix_delta, K, herm)
        except PolyOUError:
            continue
        out[idx] = implied_vols(prices, fut, K, T)
    return out


def objective_from_ivs(problem: CalibrationProblem, ivs: np.ndarray) -> float:
    w = problem.weight_vector()
    bad = ~np.isfinite(ivs)
    r = np.where(bad, 0.0, ivs - problem.quotes.mids)
    return float(np.dot(w, r * r) + PENALTY * bad.sum())


def objective(problem: CalibrationProblem, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if not np.isfinite(theta).all():
        raise InputError("theta must be finite")
    try:
        model = problem.model(theta)
    except PolyOUError:
        return PENALTY * len(problem.quotes)
    return objective_from_ivs(problem, model_ivs(problem, model))


def synthetic_quotes(problem_template: CalibrationProblem, truth: dict, half_spread: float = 0.0) -> QuoteSet:
    """Quotes whose mids are the template's own model vols at ``truth``."""
    ivs = model_ivs(problem_template, build_model(problem_template.family, {**problem_template.fixed, **truth}))
    if not np.isfinite(ivs).all():
        raise InputError("truth parameters do not price every quote")
    rows = tuple(Quote(q.instrument, q.maturity, q.strike, q.forward, float(v - half_spread), float(v + half_spread))
                 for q, v in zip(problem_template.quotes.rows, ivs))
    return QuoteSet(rows)


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int = 2000
    xatol: float = 1e-6
    initial_step: float = 0.1  # simplex edge in transformed coordinates
    f_target: float = 1e-14  # stop before iterating when the start already fits this well


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    params: dict
    objective_start: float
    objective: float
    evaluations: int
    iterations: int
    converged: bool
    rmse: float  # implied-vol RMSE in vol points (1.0 = 100%)
    residuals: np.ndarray
    trace: tuple[tuple[int, float], ...]

    def to_text(self) -> str:
        lines = [f"converged: {str(self.converged).lower()}",
                 f"evaluations: {self.evaluations}",
                 f"iterations: {self.iterations}",
                 f"objective_start: {self.objective_start:.12g}",
                 f"objective: {self.objective:.12g}",
                 f"rmse_bp: {self.rmse * 1e4:.6f}"]
        lines += [f"param.{k}: {_fmt(v)}" for k, v in sorted(self.params.items()) if not isinstance(v, ForwardVarianceCurve)]
        return "\n".join(lines) + "\n"

    def residuals_csv(self, quotes: QuoteSet) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instrument", "maturity", "strike", "mid_iv", "model_iv", "residual"])
        for q, r in zip(quotes.rows, self.residuals):
            w.writerow([q.instrument, _fmt(q.maturity), _fmt(q.strike), _fmt(q.mid_iv),
                        _fmt(q.mid_iv + r), _fmt(r)])
        return buf.getvalue()


def _fmt(v) -> str:
    return f"{float(v):.10g}"


def calibrate(problem: CalibrationProblem, start: dict | None = None, opt: OptimizerConfig | None = None,
              strict: bool = False) -> tuple[ModelSpec, CalibrationReport]:
    """Nelder-Mead in transformed coordinates; returns the best point ever evaluated.

    With ``strict`` an exhausted budget raises NotConverged carrying (model, report).
    """
    opt = opt or OptimizerConfig()
    merged = {**problem.fixed, **(start or {})}
    missing = [f.name for f in problem.free if f.name not in merged]
    if missing:
        raise InputError(f"no start value for {', '.join(missing)}")
    theta0 = problem.theta(merged)
    best = {"theta": theta0, "f": math.inf}
    count = [0]
    trace: list[tuple[int, float]] = []

    def f(theta):
        count[0] += 1
        val = objective(problem, theta)
        if val < best["f"]:
            best["theta"], best["f"] = np.array(theta, dtype=float), val
        return val

    f0 = f(theta0)
    converged = True
    iterations = 0
    if opt.max_evals > 1 and f0 > opt.f_target:
        simplex = np.vstack([theta0] + [theta0 + opt.initial_step * e for e in np.eye(theta0.size)])

        def note(xk):
            trace.append((len(trace) + 1, best["f"]))

        res = minimize(f, theta0, method="Nelder-Mead", callback=note,
                       options={"initial_simplex": simplex, "xatol": opt.xatol, "fatol": math.inf,
                                "maxfev": opt.max_evals - 1, "maxiter": 10 ** 9, "adaptive": False})
        converged = bool(res.success)
        iterations = int(res.nit)
    theta = best["theta"]
    model = problem.model(theta)
    ivs = model_ivs(problem, model)
    resid = ivs - problem.quotes.mids
    finite = np.isfinite(resid)
    rmse = float(np.sqrt(np.mean(resid[finite] ** 2))) if finite.any() else math.inf
    report = CalibrationReport(params=problem.params(theta), objective_start=f0, objective=best["f"],
                               evaluations=count[0], iterations=iterations, converged=converged,
                               rmse=rmse if finite.all() else math.inf, residuals=resid, trace=tuple(trace))
    if strict and not converged:
        raise NotConverged("evaluation budget exhausted", best=(model, report))
    return model, report
