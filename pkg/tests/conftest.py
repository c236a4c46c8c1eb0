import warnings

import numpy as np
import pytest

from zcoupling.quantities import GHZ, MHZ, PLANCK, TWO_PI


@pytest.fixture
def ec250():
    """E_C/h = 250 MHz in joules."""
    return 250 * MHZ * PLANCK


@pytest.fixture
def ej12p5():
    """E_J/h = 12.5 GHz in joules."""
    return 12.5 * GHZ * PLANCK


@pytest.fixture
def ghz_grid():
    return lambda lo, hi, n: TWO_PI * GHZ * np.linspace(lo, hi, n)


@pytest.fixture
def quiet():
    """Silence library warnings inside the test body."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
