import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trizone.config import build_capabilities, mock_config

settings.register_profile(
    "trizone",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("trizone")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mock_caps():
    return build_capabilities(mock_config(seed=0))


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
