import math
import warnings

import pytest

from serrin.lane_emden import SolveConfig, solve
from serrin.special_fn import Params

# radius of the Newton solve used for the asymptotics checks (the continuation
# branch from small radii folds before e^-2)
NEWTON_RADIUS = 1e-2

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def p3():
    return Params(3, 0.5)


@pytest.fixture(scope="session")
def monotone_solve(p3):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve(SolveConfig(p3, ball_radius=math.exp(-2.0)))


@pytest.fixture(scope="session")
def newton_config(p3):
    return SolveConfig(p3, ball_radius=NEWTON_RADIUS, method="newton")


@pytest.fixture(scope="session")
def newton_solve(newton_config):
    return solve(newton_config)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
