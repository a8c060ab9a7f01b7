"""Strict JSON run configuration: every key is validated and unknown keys are rejected."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import InputError
from .models import ModelSpec, bergomi_truncated, quintic_ou, stein_stein
from .montecarlo import McConfig
from .oulaw import ForwardVarianceCurve, G0Table, OUParams
from .powerseries import PowerSeries
from .riccati import RiccatiConfig

DEFAULT_EPS = 1.0 / 52.0
DEFAULT_XI0 = 0.025

_REQUIRED = {
    "quintic": ("rho", "alpha", "p0", "p1", "p3", "p5"),
    "bergomi": ("rho", "alpha", "eta"),
    "stein_stein": ("rho", "a", "b", "c", "x0"),
    "custom": ("rho", "a", "b", "c", "x0", "p"),
}
_OPTIONAL = {
    "quintic": ("eps", "xi0", "spot"),
    "bergomi": ("eps", "N", "xi0", "spot"),
    "stein_stein": ("g0", "spot"),
    "custom": ("xi0", "g0", "spot"),
}
_SECTIONS = {
    "model": None,
    "riccati": ("M", "n", "k_max", "steps_per_year", "layer", "layer_factor"),
    "quadrature": ("lewis_nodes", "hermite_nodes", "volswap_nodes"),
    "mc": ("paths", "steps", "seed", "antithetic", "vol"),
    "price": ("maturities", "strikes", "log_moneyness"),
    "volswap": ("maturities",),
    "vix": ("maturities", "strikes", "delta"),
    "calibrate": ("free", "start", "weights", "max_evals", "xatol", "initial_step", "lewis_nodes"),
    "riccati_dump": ("u", "u_imag", "T", "g2", "mode"),
    "validate": ("level",),
}


def _reject_constant(name: str):
    raise InputError(f"non-finite JSON constant {name}")


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise InputError(f"duplicate key {k!r}")
        out[k] = v
    return out


def loads(text: str) -> dict:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed config: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def _check_keys(block: dict, allowed, where: str) -> None:
    if not isinstance(block, dict):
        raise InputError(f"{where} must be an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise InputError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InputError(f"{where} must be a finite number")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"{where} must be an integer")
    return int(v)


def _num_list(v, where: str) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise InputError(f"{where} must be a list")
    return tuple(_num(x, f"{where}[{i}]") for i, x in enumerate(v))


def parse_curve(v, where: str = "model.xi0") -> ForwardVarianceCurve:
    if not isinstance(v, dict):
        return ForwardVarianceCurve.flat(_num(v, where))
    kind = v.get("kind")
    if kind == "flat":
        _check_keys(v, ("kind", "level"), where)
        return ForwardVarianceCurve.flat(_num(v.get("level"), f"{where}.level"))
    if kind == "parametric":
        _check_keys(v, ("kind", "V0", "k", "Vinf"), where)
        return ForwardVarianceCurve.parametric(*(_num(v.get(k), f"{where}.{k}") for k in ("V0", "k", "Vinf")))
    if kind == "piecewise":
        _check_keys(v, ("kind", "times", "values"), where)
        return ForwardVarianceCurve("piecewise", times=_num_list(v.get("times"), f"{where}.times"),
                                    values=_num_list(v.get("values"), f"{where}.values"))
    raise InputError(f"{where}.kind must be flat, parametric or piecewise")


def curve_block(curve: ForwardVarianceCurve):
    if curve.kind == "flat":
        return curve.level
    if curve.kind == "parametric":
        return {"kind": "parametric", "V0": curve.V0, "k": curve.k, "Vinf": curve.Vinf}
    return {"kind": "piecewise", "times": list(curve.times), "values": list(curve.values)}


def _parse_g0(v, where: str) -> G0Table:
    if not isinstance(v, dict):
        return G0Table.constant(_num(v, where))
    _check_keys(v, ("times", "values"), where)
    return G0Table(_num_list(v.get("times"), f"{where}.times"), _num_list(v.get("values"), f"{where}.values"))


def parse_model(block: dict) -> ModelSpec:
    if not isinstance(block, dict):
        raise InputError("model must be an object")
    fam = block.get("family")
    if fam not in _REQUIRED:
        raise InputError(f"model.family must be one of {', '.join(_REQUIRED)}")
    _check_keys(block, ("family",) + _REQUIRED[fam] + _OPTIONAL[fam], "model")
    missing = [k for k in _REQUIRED[fam] if k not in block]
    if missing:
        raise InputError(f"model is missing {', '.join(missing)}")
    num = {k: _num(block[k], f"model.{k}") for k in _REQUIRED[fam] + _OPTIONAL[fam]
           if k in block and k not in ("p", "xi0", "g0", "N")}
    spot = num.get("spot", 1.0)
    if fam == "quintic":
        return quintic_ou(num["rho"], num["alpha"], num.get("eps", DEFAULT_EPS), num["p0"], num["p1"],
                          num["p3"], num["p5"], xi0=parse_curve(block.get("xi0", DEFAULT_XI0)), spot=spot)
    if fam == "bergomi":
        return bergomi_truncated(num["rho"], num["alpha"], num.get("eps", DEFAULT_EPS), num["eta"],
                                 _int(block.get("N", 8), "model.N"),
                                 xi0=parse_curve(block.get("xi0", DEFAULT_XI0)), spot=spot)
    if fam == "stein_stein":
        return stein_stein(num["rho"], num["a"], num["b"], num["c"], num["x0"],
                           g0_table=_parse_g0(block.get("g0", 1.0), "model.g0"), spot=spot)
    if ("xi0" in block) == ("g0" in block):
        raise InputError("custom model needs exactly one of xi0 or g0")
    coeffs = _num_list(block["p"], "model.p")
    ou = OUParams(num["a"], num["b"], num["c"], num["x0"])
    if "g0" in block:
        return ModelSpec(ou=ou, p=PowerSeries(coeffs), rho=num["rho"], xi0=None, spot=spot,
                         g0_table=_parse_g0(block["g0"], "model.g0"), family="custom")
    return ModelSpec(ou=ou, p=PowerSeries(coeffs), rho=num["rho"], xi0=parse_curve(block["xi0"]),
                     spot=spot, family="custom")


def parse_riccati(block: dict | None, default: RiccatiConfig) -> RiccatiConfig:
    if block is None:
        return default
    _check_keys(block, _SECTIONS["riccati"], "riccati")
    kw = dict(M=default.M, n=default.n, k_max=default.k_max, steps_per_year=default.steps_per_year,
              layer=default.layer, layer_factor=default.layer_factor)
    for k in ("M", "k_max", "layer_factor"):
        if k in block:
            kw[k] = _int(block[k], f"riccati.{k}")
    if "n" in block:
        kw["n"] = None if block["n"] is None else _int(block["n"], "riccati.n")
    if "steps_per_year" in block:
        kw["steps_per_year"] = None if block["steps_per_year"] is None else _num(block["steps_per_year"],
                                                                               "riccati.steps_per_year")
    if "layer" in block:
        kw["layer"] = _num(block["layer"], "riccati.layer")
    return RiccatiConfig(**kw)


@dataclass(frozen=True)
class Quadrature:
    lewis_nodes: int = 128
    hermite_nodes: int = 64
    volswap_nodes: int = 64


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    model: ModelSpec
    quadrature: Quadrature = field(default_factory=Quadrature)
    mc: McConfig = field(default_factory=McConfig)
    mc_vol: str = "model"

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def riccati(self, default: RiccatiConfig) -> RiccatiConfig:
        return parse_riccati(self.raw.get("riccati"), default)


def parse_config(data: dict) -> RunConfig:
    _check_keys(data, _SECTIONS, "config")
    if "model" not in data:
        raise InputError("config needs a model block")
    for name, keys in _SECTIONS.items():
        if keys is not None and name in data:
            _check_keys(data[name], keys, name)
    model = parse_model(data["model"])
    parse_riccati(data.get("riccati"), RiccatiConfig())
    q = data.get("quadrature", {})
    quad = Quadrature(**{k: _int(v, f"quadrature.{k}") for k, v in q.items()})
    for k, v in data.get("price", {}).items():
        _num_list(v, f"price.{k}")
    if "strikes" in data.get("price", {}) and "log_moneyness" in data["price"]:
        raise InputError("price takes strikes or log_moneyness, not both")
    for sec in ("volswap", "vix"):
        blk = data.get(sec, {})
        for k in ("maturities", "strikes"):
            if k in blk:
                _num_list(blk[k], f"{sec}.{k}")
        if "delta" in blk:
            _num(blk["delta"], f"{sec}.delta")
    m = dict(data.get("mc", {}))
    vol = m.pop("vol", "model")
    if vol not in ("model", "exact_bergomi"):
        raise InputError("mc.vol must be model or exact_bergomi")
    if vol == "exact_bergomi" and data["model"].get("family") != "bergomi":
        raise InputError("mc.vol exact_bergomi needs a bergomi model")
    mc_kw = {k: (bool(v) if k == "antithetic" else _int(v, f"mc.{k}")) for k, v in m.items()}
    if "antithetic" in m and not isinstance(m["antithetic"], bool):
        raise InputError("mc.antithetic must be true or false")
    mc = McConfig(**mc_kw)
    cal = data.get("calibrate", {})
    if "free" in cal:
        free = cal["free"]
        if not isinstance(free, dict) or not free:
            raise InputError("calibrate.free must be a non-empty object of [lo, hi] pairs")
        for k, v in free.items():
            b = _num_list(v, f"calibrate.free.{k}")
            if len(b) != 2:
                raise InputError(f"calibrate.free.{k} must be [lo, hi]")
    if "start" in cal:
        if not isinstance(cal["start"], dict):
            raise InputError("calibrate.start must be an object")
        for k, v in cal["start"].items():
            _num(v, f"calibrate.start.{k}")
    for k in ("max_evals", "lewis_nodes"):
        if k in cal:
            _int(cal[k], f"calibrate.{k}")
    for k in ("xatol", "initial_step"):
        if k in cal:
            _num(cal[k], f"calibrate.{k}")
    dump = data.get("riccati_dump", {})
    for k in ("u", "u_imag", "T", "g2"):
        if k in dump:
            _num(dump[k], f"riccati_dump.{k}")
    if dump.get("mode", "charfn") not in ("charfn", "laplace"):
        raise InputError("riccati_dump.mode must be charfn or laplace")
    if data.get("validate", {}).get("level", "fast") not in ("fast", "full"):
        raise InputError("validate.level must be fast or full")
    return RunConfig(raw=data, model=model, quadrature=quad, mc=mc, mc_vol=vol)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(loads(text))


def model_block(family: str, params: dict, spot: float) -> dict:
    """Config model block for calibration parameters (round-trips through parse_model)."""
    out: dict = {"family": family}
    for k, v in params.items():
        if k == "xi0":
            out[k] = curve_block(v) if isinstance(v, ForwardVarianceCurve) else float(v)
        elif k == "N":
            out[k] = int(v)
        else:
            out[k] = float(v)
    out["spot"] = float(spot)
    return out
