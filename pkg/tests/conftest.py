from __future__ import annotations

import pytest

from polyou.models import bergomi_truncated, quintic_ou, stein_stein


@pytest.fixture(scope="session")
def quintic():
    return quintic_ou(-0.65, -0.6, 1 / 52, 0.01, 1.0, 0.214, 0.227, xi0=0.025, spot=100.0)


@pytest.fixture(scope="session")
def bergomi():
    return bergomi_truncated(-0.7, -0.7, 1 / 52, 1.2, 8, xi0=0.025, spot=100.0)


@pytest.fixture(scope="session")
def ss():
    return stein_stein(-0.5, 0.05, -1.0, 0.5, 0.2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
