import os

import pytest
from hypothesis import HealthCheck, settings

from cirdiv import CirParams, ValueFunction

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# parameter sets used throughout
FIG2 = CirParams(0.001, 0.002, 0.07)  # high volatility (the worked example)
ZERO = CirParams(0.001, 0.002, 0.09)  # high volatility, used for the zero-barrier checks
LOW = CirParams(0.1, 0.05, 0.2)  # low volatility
MU = 0.5

# one summary line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def fig2_vf():
    return ValueFunction.build(FIG2, MU)


@pytest.fixture(scope="session")
def zero_vf():
    return ValueFunction.build(ZERO, MU)


@pytest.fixture(scope="session")
def low_vf():
    return ValueFunction.build(LOW, MU)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
