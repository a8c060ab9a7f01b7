from __future__ import annotations

import json

import pytest

from polyou import config as cfgmod
from polyou.errors import InputError
from polyou.oulaw import ForwardVarianceCurve

BASE = {"model": {"family": "quintic", "rho": -0.65, "alpha": -0.6, "p0": 0.01, "p1": 1.0, "p3": 0.214,
                  "p5": 0.227}}


def test_defaults():
    rc = cfgmod.parse_config(BASE)
    assert rc.model.ou.b == pytest.approx(-0.6 * 52)
    assert rc.model.xi0 == ForwardVarianceCurve.flat(0.025)
    assert rc.model.spot == 1.0 and rc.quadrature.lewis_nodes == 128


@pytest.mark.parametrize("text", [
    '{"model": {"family": "quintic", "rho": 1, "rho": 2}}',
    '{"model": {"family": "bergomi", "rho": NaN, "alpha": -0.7, "eta": 1.2}}',
    '[1, 2]',
    '{"model": ',
])
def test_strict_json(text):
    with pytest.raises(InputError):
        cfgmod.parse_config(cfgmod.loads(text))


@pytest.mark.parametrize("patch", [
    {"bogus": {}},
    {"riccati": {"M": 32, "typo": 1}},
    {"model": {**BASE["model"], "extra": 1}},
    {"model": {"family": "quintic", "rho": -0.65}},
    {"model": {**BASE["model"], "family": "unknown"}},
    {"mc": {"vol": "exact_bergomi"}},
    {"mc": {"antithetic": 1}},
    {"price": {"strikes": [1.0], "log_moneyness": [0.0]}},
    {"riccati_dump": {"mode": "other"}},
    {"validate": {"level": "medium"}},
    {"calibrate": {"free": {"rho": [-1]}}},
    {"model": {"family": "custom", "rho": 0, "a": 0, "b": -1, "c": 1, "x0": 0}},
    {"riccati": {"M": "32"}},
])
def test_rejects_invalid(patch):
    with pytest.raises(InputError):
        cfgmod.parse_config({**BASE, **patch})


def test_curves_and_families():
    rc = cfgmod.parse_config({"model": {"family": "bergomi", "rho": -0.7, "alpha": -0.7, "eta": 1.2, "N": 6,
                                        "xi0": {"kind": "parametric", "V0": 0.025, "k": 5, "Vinf": 0.06}}})
    assert rc.model.p.degree == 6 and rc.model.xi0.kind == "parametric"
    rc = cfgmod.parse_config({"model": {"family": "stein_stein", "rho": -0.5, "a": 0.05, "b": -1, "c": 0.5,
                                        "x0": 0.2, "g0": {"times": [0, 1], "values": [1, 2]}}})
    assert rc.model.normalization == "raw-g0"
    rc = cfgmod.parse_config({"model": {"family": "custom", "rho": 0, "a": 0, "b": -1, "c": 1, "x0": 0,
                                        "p": [1, 0.5], "xi0": {"kind": "piecewise", "times": [0, 1],
                                                              "values": [0.02, 0.03]}}})
    assert rc.model.xi0.kind == "piecewise"


def test_riccati_override():
    rc = cfgmod.parse_config({**BASE, "riccati": {"M": 20, "n": 300}})
    from polyou.transforms import desk_config
    cfg = rc.riccati(desk_config())
    assert cfg.M == 20 and cfg.n == 300 and cfg.layer == desk_config().layer


def test_model_block_round_trip():
    params = {"rho": -0.6, "alpha": -0.5, "eps": 1 / 52, "p0": 0.02, "p1": 1.0, "p3": 0.2, "p5": 0.3,
              "xi0": ForwardVarianceCurve.parametric(0.02, 4.0, 0.05)}
    block = cfgmod.model_block("quintic", params, 100.0)
    text = cfgmod.dumps({"model": block})
    rc = cfgmod.parse_config(cfgmod.loads(text))
    assert rc.model == cfgmod.parse_config({"model": json.loads(text)["model"]}).model
    assert rc.model.p.coeffs == (0.02, 1.0, 0.0, 0.2, 0.0, 0.3) and rc.model.spot == 100.0


def test_missing_file():
    with pytest.raises(InputError):
        cfgmod.load_config("/nonexistent/config.json")
