import functools

import pytest
from hypothesis import HealthCheck, settings

from dtnlab import build_square_domain

settings.register_profile(
    "lab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("lab")

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def square(d: int, n: int, side: float = 1.0):
    return build_square_domain(d, n, side)


@pytest.fixture
def dom16():
    return square(2, 16)


@pytest.fixture
def dom32():
    return square(2, 32)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
