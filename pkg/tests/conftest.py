import math

import numpy as np
import pytest

from phiperiodic.grid import PeriodicGrid
from phiperiodic.problem import (ProblemSpec, builtin_relativistic, cosine_forcing,
                                 preset, zero_forcing, zero_nonlinearity)

PRESET_NAMES = ("relativistic-pendulum-classic-f", "strong-resonance-attractive",
                "strong-resonance-repulsive")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def trivial_spec():
    return ProblemSpec(2 * math.pi, builtin_relativistic(), zero_nonlinearity(),
                       zero_forcing(), name="trivial")


@pytest.fixture
def forced_spec():
    """f = 0, h = 0.5 cos t on [0, 2 pi]: J alone, with a semi-analytic minimizer."""
    return ProblemSpec(2 * math.pi, builtin_relativistic(), zero_nonlinearity(),
                       cosine_forcing(0.5), name="forced")


@pytest.fixture(params=PRESET_NAMES)
def preset_spec(request):
    return preset(request.param)


def grid_for(spec, N=256):
    return PeriodicGrid(N, spec.T)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
