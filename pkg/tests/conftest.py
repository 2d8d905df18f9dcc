import numpy as np
import pytest

from logdecay_lab import DampingProfile, assemble_generator, build_interval, build_rectangle, eigen_full

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_gen1d(n=200, a=0.5, end="right"):
    d = build_interval(n, 1.0, end)
    return assemble_generator(d, None, DampingProfile.constant(d, a))


def make_gen2d(n=31, a=1.0, side="right", rng=(0.0, 0.5)):
    d = build_rectangle(n, n, 1.0, 1.0, side, rng)
    return assemble_generator(d, None, DampingProfile.constant(d, a))


@pytest.fixture(scope="session")
def gen1d():
    return make_gen1d()


@pytest.fixture(scope="session")
def gen2d():
    return make_gen2d()


@pytest.fixture(scope="session")
def small2d():
    return make_gen2d(9)


@pytest.fixture(scope="session")
def spectrum2d(gen2d):
    return eigen_full(gen2d, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
