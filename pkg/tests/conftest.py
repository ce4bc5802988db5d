import numpy as np
import pytest

from bakhvalov_fem.checks import valid_grid

SEED = 20240601


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def grid():
    """Every (eps, N) of the full sweep that satisfies the mesh assumptions."""
    return valid_grid()


@pytest.fixture(scope="session")
def table1_outcome():
    """The full reference sweep with the quadrature audit, shared by the norm and acceptance tests."""
    from bakhvalov_fem.study import StudyConfig, run

    return run(StudyConfig(mode="table1", audit_quadrature=True))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
