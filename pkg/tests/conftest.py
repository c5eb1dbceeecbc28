import numpy as np
import pytest

from frihls.mixture import GaussianMixture

_CRITERIA = []


@pytest.fixture
def gauss1():
    return GaussianMixture.gaussian(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def criterion():
    """Record an acceptance verdict; all verdicts are printed at the end of the run."""
    def record(number, passed, detail):
        _CRITERIA.append((number, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}")
