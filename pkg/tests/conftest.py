import pytest

from sadovskii.solver import UNBOUNDED, SolverConfig, solve

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def run_128():
    return solve(SolverConfig(mu=0.05, nu=1.0, n1=128, n2=64))


@pytest.fixture(scope="session")
def run_256():
    return solve(SolverConfig(mu=0.05, nu=1.0, n1=256, n2=128))


@pytest.fixture(scope="session")
def run_64():
    return solve(SolverConfig(mu=0.05, nu=1.0, n1=64, n2=32))


@pytest.fixture(scope="session")
def run_128_uncapped():
    return solve(SolverConfig(mu=0.05, nu=UNBOUNDED, n1=128, n2=64))


@pytest.fixture(scope="session")
def run_detached():
    # mass cap active: gamma > 0
    return solve(SolverConfig(mu=0.5, nu=1.0, n1=128, n2=64))
