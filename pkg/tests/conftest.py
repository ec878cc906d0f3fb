import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ctlab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ctlab"))


@pytest.fixture(scope="session")
def shallow_pair():
    """Depth-4 lamination pair: same leaf sets as deeper ones, built faster."""
    from ctlab import heightfn as hf

    return hf.approximate_laminations(4)


@pytest.fixture(scope="session")
def depth8_pair():
    from ctlab import heightfn as hf

    return hf.approximate_laminations(8)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
