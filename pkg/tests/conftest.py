import numpy as np
import pytest

from inclusionbem import ProblemSpec, make_sphere, make_star

DEFAULT_F_O = "1 + x3 + 1/(3 - x1)"
DEFAULT_F = "2*zeta + eps*t1"
DEFAULT_G = "zeta^2 + 1/(4*pi)"
EPS_GRID = np.geomspace(1e-3, 1e-1, 8)

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def sphere8():
    return make_sphere(0, 1, 8)


@pytest.fixture(scope="session")
def star16():
    return make_star("1 + 0.1*cos(2*theta)", 16)


def default_problem(L=8, epsilons=EPS_GRID):
    return ProblemSpec(make_sphere(0, 1, L), make_sphere(0, 1, L), DEFAULT_F_O, DEFAULT_F, DEFAULT_G, epsilons)


def oracle_problem(L=8, epsilons=(0.025, 0.05, 0.075, 0.1)):
    return ProblemSpec(make_sphere(0, 1, L), make_sphere(0, 1, L), "1", "2*zeta", "1", epsilons)


@pytest.fixture(scope="session")
def default_p():
    return default_problem()


@pytest.fixture(scope="session")
def oracle_p():
    return oracle_problem()


@pytest.fixture(scope="session")
def default_branch(default_p):
    from inclusionbem import continuation
    return continuation(default_p)


@pytest.fixture(scope="session")
def oracle_branch(oracle_p):
    from inclusionbem import continuation
    return continuation(oracle_p)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {line}")
