"""Acceptance criteria 1-12 at their stated tolerances and runtime limits."""
from __future__ import annotations


import pytest

from polyou import cli
from polyou import validation as v

from conftest import ACCEPTANCE_LINES

# criterion -> runtime limit in seconds (None where no limit is stated)
CRITERIA = {
    1: (v.criterion_1, 1.0),
    2: (v.criterion_2, 1.0),
    3: (v.criterion_3, 1.0),
    4: (v.criterion_4, None),
    5: (v.criterion_5, 300.0),
    6: (v.criterion_6, 300.0),
    7: (v.criterion_7, 300.0),
    8: (v.criterion_8, None),
    9: (v.criterion_9, None),
    10: (v.criterion_10, 30.0),
    11: (v.criterion_11, 600.0),
}
SLOW = {5, 6, 7, 10, 11}


@pytest.fixture(scope="module", autouse=True)
def compiled_kernel():
    # runtime limits exclude the one-time JIT compile of the Riccati kernel
    v.quartic_errors(5, n=2, times=[0.2])


def _report(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def _check(cid: int) -> None:
    fn, limit = CRITERIA[cid]
    res = v.run_criterion(cid, fn)
    within = limit is None or res.seconds < limit
    suffix = "" if within else f" [runtime {res.seconds:.1f}s exceeds {limit:.0f}s]"
    line = res.line() + suffix
    if not within and res.passed:
        line = line.replace(" PASS ", " FAIL ", 1)
    _report(line)
    assert res.passed, line
    assert within, line


@pytest.mark.parametrize("cid", [pytest.param(c, marks=pytest.mark.slow) if c in SLOW else c for c in CRITERIA])
def test_criterion(cid):
    _check(cid)


def test_criterion_12_determinism(tmp_path, capsys):
    outs = []
    for i, threads in enumerate((1, 1, 8)):
        path = tmp_path / f"run{i}.csv"
        cli.run(["validate", "--level", "fast", "--threads", str(threads), "--quiet", "--out", str(path)])
        outs.append(path.read_bytes())
    capsys.readouterr()
    same = outs[0] == outs[1] == outs[2]
    _report(f"criterion 12 {'PASS' if same else 'FAIL'}  determinism: fast suite CSV byte-identical "
            f"across repeated runs and --threads 1/8: {same}")
    assert same
    assert len(outs[0].decode().strip().splitlines()) == 1 + len(v.FAST)
