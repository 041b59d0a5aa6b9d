import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gauss64():
    """64-point squared-exponential grid space and its chaining profile."""
    from chainbound.chaining import k_profile
    from chainbound.presets import gaussian_grid_space

    sp = gaussian_grid_space(64, 0.25)
    return sp, k_profile(sp)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
