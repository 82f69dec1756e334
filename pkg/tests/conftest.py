import functools

import numpy as np
import pytest

from tprabi import collapse, fock
from tprabi.model import ModelParams

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def collapse_states(omega0, max_states=None, omega=1.0):
    return tuple(collapse.shoot_bound_states(ModelParams.at_collapse(omega0, omega), max_states))


@functools.lru_cache(maxsize=None)
def fock_spectrum(omega, omega0, epsilon, k, cutoff=fock.DEFAULT_CUTOFF):
    return fock.spectrum(ModelParams(omega, omega0, epsilon), k, cutoff, check_convergence=False)


def hermite_grid(extent=12.0, h=1e-3):
    n = int(round(extent / h))
    return h * np.arange(-n, n + 1)


@pytest.fixture(scope="session")
def record_acceptance():
    def record(number, passed, message):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {message}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
