import numpy as np
import pytest

from rkcmap import build_disc_grid, flat_metric, sphere_metric


@pytest.fixture(scope="session")
def grid16():
    return build_disc_grid(16)


@pytest.fixture(scope="session")
def grid32():
    return build_disc_grid(32)


@pytest.fixture(scope="session")
def grid64():
    return build_disc_grid(64)


@pytest.fixture(scope="session")
def flat():
    return flat_metric()


@pytest.fixture(scope="session")
def sphere():
    return sphere_metric()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
