import math

import numpy as np
import pytest

from jcberry.hilbert import FockSpace, System

R_HALF = 1 / math.sqrt(2)
# lambda*T long enough that non-adiabatic phase errors stay below ~5e-3 rad
T_ADIABATIC = 400.0


@pytest.fixture
def fock16():
    return FockSpace(16)


@pytest.fixture
def fock32():
    return FockSpace(32)


@pytest.fixture
def single15():
    return System.single(15)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d, rank=None):
    rank = rank or d
    X = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
