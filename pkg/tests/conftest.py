import numpy as np
import pytest

from skewfit.battery import build_battery


@pytest.fixture(scope="session")
def battery():
    return build_battery()


@pytest.fixture(scope="session")
def battery_by_name(battery):
    return {c.name: c for c in battery}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
