import numpy as np
import pytest

from gridsten.grid import Grid2D


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid(rng, nx, ny, dx=1.0, dy=1.0) -> Grid2D:
    return Grid2D(nx, ny, dx, dy, rng.standard_normal(nx * ny))
