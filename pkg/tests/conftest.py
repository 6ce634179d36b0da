import os
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

from hopdyn.core import default_params
from helpers import vanishing_foot

settings.register_profile(
    "hopdyn",
    deadline=None,
    max_examples=int(os.environ.get("HOPDYN_MAX_EXAMPLES", "25")),
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("hopdyn")


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def lossless():
    """No drag, no leg damper, vanishing foot."""
    return replace(vanishing_foot(default_params().without_drag()), b_B=0.0)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
