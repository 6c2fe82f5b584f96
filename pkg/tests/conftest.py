import numpy as np
import pytest


@pytest.fixture(scope="session")
def rng():
    return np.random.Generator(np.random.Philox(key=20240817))


def pytest_addoption(parser):
    parser.addoption("--skip-heavy", action="store_true", default=False,
                     help="skip the multi-minute acceptance runs")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-heavy"):
        return
    marker = pytest.mark.skip(reason="--skip-heavy")
    for item in items:
        if "heavy" in item.keywords:
            item.add_marker(marker)


def pytest_configure(config):
    config.addinivalue_line("markers", "heavy: multi-minute acceptance runs")
