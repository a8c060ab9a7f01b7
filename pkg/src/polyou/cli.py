"""Command-line entry point: ``polyou <command> --config PATH``."""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from functools import partial

import numpy as np

from . import config as cfgmod
from .calibration import (FAMILIES, CalibrationProblem, FreeParam, OptimizerConfig, QuoteSet, calibrate,
                          calibration_config)
from .errors import InputError, NumericalError, PolyOUError
from .montecarlo import exact_bergomi_vol, mc_calls, mc_volswap, simulate
from .pricing.blackscholes import implied_vols
from .pricing.lewis import lewis_calls, lewis_rule
from .pricing.quadrature import gauss_hermite
from .pricing.volswap import vol_swap
from .riccati import CoefficientSchedule, solve
from .transforms import desk_config
from .validation import criterion_1, results_csv, run_suite
from .vix import VIX_WINDOW, vix_future, vix_implied_vol, vix_option

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def _maturities(section: dict, where: str) -> list[float]:
    mats = [float(t) for t in section.get("maturities", [])]
    if any(not t > 0 for t in mats):
        raise InputError(f"{where}.maturities must be > 0")
    return mats


def _strikes(rc: cfgmod.RunConfig) -> np.ndarray:
    sec = rc.section("price")
    if "log_moneyness" in sec:
        return rc.model.spot * np.exp(np.asarray(sec["log_moneyness"], dtype=float))
    K = np.asarray(sec.get("strikes", []), dtype=float)
    if np.any(K <= 0):
        raise InputError("price.strikes must be > 0")
    return K


def cmd_price(rc: cfgmod.RunConfig, threads: int = 1) -> str:
    mats, K = _maturities(rc.section("price"), "price"), _strikes(rc)
    cfg = rc.riccati(desk_config())
    rule = lewis_rule(rc.quadrature.lewis_nodes)
    rows = []
    if K.size:
        for T in mats:
            try:
                prices = lewis_calls(rc.model, K, T, cfg=cfg, quad=rule, threads=threads)
            except NumericalError as exc:
                raise NumericalError(f"pricing failed at T={T!r}: {exc}") from exc
            iv = implied_vols(prices, rc.model.spot, K, T)
            rows += [(T, k, p, v) for k, p, v in zip(K, prices, iv)]
    return _csv(("maturity", "strike", "price", "implied_vol"), rows)


def cmd_volswap(rc: cfgmod.RunConfig, threads: int = 1) -> str:
    cfg = rc.riccati(desk_config())
    n = rc.quadrature.volswap_nodes
    rows = []
    for T in _maturities(rc.section("volswap"), "volswap"):
        try:
            rows.append((T, vol_swap(rc.model, T, cfg=cfg, n_body=n, n_tail=n, threads=threads)))
        except NumericalError as exc:
            raise NumericalError(f"vol swap failed at T={T!r}: {exc}") from exc
    return _csv(("maturity", "fair_strike"), rows)


def cmd_vix(rc: cfgmod.RunConfig) -> str:
    sec = rc.section("vix")
    delta = float(sec.get("delta", VIX_WINDOW))
    quad = gauss_hermite(rc.quadrature.hermite_nodes)
    rows = []
    for T in _maturities(sec, "vix"):
        fut = vix_future(rc.model, T, delta, quad)
        strikes = [float(k) for k in sec["strikes"]] if "strikes" in sec else [fut]
        prices = vix_option(rc.model, T, delta, np.asarray(strikes), quad)
        for k, p in zip(strikes, prices):
            rows.append((T, fut, k, p, vix_implied_vol(float(p), fut, k, T)))
    return _csv(("maturity", "future", "strike", "option_price", "implied_vol"), rows)


def _mc_vol(rc: cfgmod.RunConfig):
    if rc.mc_vol == "exact_bergomi":
        return exact_bergomi_vol(rc.model, float(rc.raw["model"]["eta"]))
    return None


def cmd_mc(rc: cfgmod.RunConfig, threads: int = 1) -> str:
    mc = replace(rc.mc, threads=threads)
    vol = _mc_vol(rc)
    if "price" in rc.raw:
        mats, K = _maturities(rc.section("price"), "price"), _strikes(rc)
        rows = []
        if mats and K.size:
            stats = simulate(rc.model, mats, mc, vol)
            for T in mats:
                p, se = mc_calls(stats, T, K, rc.model.spot)
                iv = implied_vols(p, rc.model.spot, K, T)
                rows += list(zip([T] * K.size, K, p, iv, se))
        return _csv(("maturity", "strike", "price", "implied_vol", "stderr"), rows)
    mats = _maturities(rc.section("volswap"), "volswap")
    rows = []
    if mats:
        stats = simulate(rc.model, mats, mc, vol)
        rows = [(T, *mc_volswap(rc.model, T, mc, stats=stats)) for T in mats]
    return _csv(("maturity", "fair_strike", "stderr"), rows)


def cmd_riccati_dump(rc: cfgmod.RunConfig) -> str:
    sec = rc.section("riccati_dump")
    T = float(sec.get("T", 1.0))
    if not T > 0:
        raise InputError("riccati_dump.T must be > 0")
    u = complex(float(sec.get("u", 1.0)), float(sec.get("u_imag", 0.0)))
    if sec.get("mode", "charfn") == "laplace":
        query = CoefficientSchedule.constant(0.0, -u.real / T, T)
    else:
        query = CoefficientSchedule.constant(1j * u, float(sec.get("g2", 0.0)), T)
    sol = solve(rc.model, query, rc.riccati(desk_config()))
    rows = [(tau, str(k), psi.real, psi.imag) for tau, vec in zip(sol.grid, sol.psi) for k, psi in enumerate(vec)]
    return _csv(("tau", "k", "re_psi", "im_psi"), rows)


def calibration_setup(rc: cfgmod.RunConfig, quotes: QuoteSet) -> tuple[CalibrationProblem, dict, OptimizerConfig]:
    fam = rc.model.family
    if fam not in FAMILIES:
        raise InputError(f"calibration supports {', '.join(FAMILIES)} models, not {fam}")
    block = rc.raw["model"]
    sec = rc.section("calibrate")
    if "free" not in sec:
        raise InputError("calibrate.free is required")
    free = tuple(FreeParam(k, float(v[0]), float(v[1])) for k, v in sec["free"].items())
    fixed = {k: float(block[k]) for k in FAMILIES[fam] if k in block and k not in ("xi0", "N", "eps")}
    fixed["eps"] = float(block.get("eps", cfgmod.DEFAULT_EPS))
    fixed["xi0"] = cfgmod.parse_curve(block.get("xi0", cfgmod.DEFAULT_XI0))
    if fam == "bergomi":
        fixed["N"] = int(block.get("N", 8))
    problem = CalibrationProblem(fam, free, fixed, quotes, weights=sec.get("weights", "uniform"),
                                 cfg=rc.riccati(calibration_config()),
                                 lewis_nodes=int(sec.get("lewis_nodes", 128)),
                                 hermite_nodes=rc.quadrature.hermite_nodes)
    start = {k: float(v) for k, v in sec.get("start", {}).items()}
    opt = OptimizerConfig(max_evals=int(sec.get("max_evals", 2000)), xatol=float(sec.get("xatol", 1e-6)),
                          initial_step=float(sec.get("initial_step", 0.1)))
    return problem, start, opt


def cmd_calibrate(rc: cfgmod.RunConfig, quotes: QuoteSet) -> tuple[str, str, str]:
    """Report text, residual CSV and calibrated config text."""
    problem, start, opt = calibration_setup(rc, quotes)
    _, report = calibrate(problem, start, opt)
    out = dict(rc.raw)
    out["model"] = cfgmod.model_block(problem.family, report.params, rc.model.spot)
    return report.to_text(), report.residuals_csv(quotes), cfgmod.dumps(out)


def cmd_validate(level: str, threads: int = 1, k_max: int | None = None, progress=None):
    overrides = {1: partial(criterion_1, k_max=k_max)} if k_max is not None else None
    results = run_suite(level, overrides=overrides, threads=threads, progress=progress)
    return results, results_csv(results)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyou", description="Polynomial OU volatility pricing and calibration.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="JSON run configuration")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        return p

    for name in ("price", "volswap", "vix", "mc", "riccati-dump"):
        common(sub.add_parser(name))
    cal = common(sub.add_parser("calibrate"))
    cal.add_argument("--quotes", required=True, help="quote CSV")
    cal.add_argument("--residuals", help="residual CSV path")
    cal.add_argument("--calibrated-config", help="path for the calibrated config")
    val = common(sub.add_parser("validate"), needs_config=False)
    val.add_argument("--level", choices=("fast", "full"))
    val.add_argument("--k-max", type=int, help="k_max used by the quartic benchmark (fault injection)")
    val.add_argument("--quiet", action="store_true", help="suppress per-criterion progress on stderr")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        if args.command == "validate":
            level = args.level
            if args.config:
                rc = cfgmod.load_config(args.config)
                level = level or rc.section("validate").get("level", "fast")
            progress = None if args.quiet else (lambda r: print(r.line(), file=sys.stderr, flush=True))
            results, text = cmd_validate(level or "fast", args.threads, args.k_max, progress)
            _write(args.out, text)
            return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
        rc = cfgmod.load_config(args.config)
        if args.seed is not None:
            rc = replace(rc, mc=replace(rc.mc, seed=args.seed))
        if args.command == "price":
            _write(args.out, cmd_price(rc, args.threads))
        elif args.command == "volswap":
            _write(args.out, cmd_volswap(rc, args.threads))
        elif args.command == "vix":
            _write(args.out, cmd_vix(rc))
        elif args.command == "mc":
            _write(args.out, cmd_mc(rc, args.threads))
        elif args.command == "riccati-dump":
            _write(args.out, cmd_riccati_dump(rc))
        else:
            try:
                quotes = QuoteSet.from_csv(args.quotes)
            except OSError as exc:
                raise InputError(f"cannot read quotes {args.quotes!r}: {exc.strerror}") from None
            report, resid, calibrated = cmd_calibrate(rc, quotes)
            _write(args.out, report)
            if args.residuals:
                _write(args.residuals, resid)
            if args.calibrated_config:
                _write(args.calibrated_config, calibrated)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PolyOUError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
