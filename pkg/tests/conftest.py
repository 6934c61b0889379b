"""Shared fixtures and the acceptance summary printed at the end of a run."""
import numpy as np
import pytest

from cm_duel.constellation import make_pam

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["G1", "G2", "G3", "G4"])
def gray(request):
    return make_pam(2, request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
