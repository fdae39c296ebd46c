import numpy as np
import pytest

from rpodstar.discretize import (
    build_advection_diffusion_3d,
    build_heat_1d,
    dispersion_desk_config,
    heat_benchmark_config,
)
from rpodstar.linsys import StateSpaceSystem


def three_state():
    """diag(0.9, 0.5, 0.3): mode 1 controllable+observable, mode 2 only
    controllable, mode 3 only observable; Markov parameters are 0.9**i."""
    return StateSpaceSystem(
        np.diag([0.9, 0.5, 0.3]),
        np.array([[1.0], [1.0], [0.0]]),
        np.array([[1.0, 0.0, 1.0]]),
    )


def scalar(a=0.5):
    return StateSpaceSystem(np.array([[a]]), np.array([[1.0]]), np.array([[1.0]]))


def random_stable(N, p, q, seed, rho=0.9):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    A *= rho / np.abs(np.linalg.eigvals(A)).max()
    return StateSpaceSystem(A, rng.standard_normal((N, p)), rng.standard_normal((q, N)))


@pytest.fixture
def diag3():
    return three_state()


@pytest.fixture(scope="session")
def heat():
    return build_heat_1d(heat_benchmark_config())


@pytest.fixture(scope="session")
def desk():
    return build_advection_diffusion_3d(dispersion_desk_config())


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
