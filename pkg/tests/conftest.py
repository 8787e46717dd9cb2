import numpy as np
import pytest

from landaulab import gaussian, two_stream


@pytest.fixture(scope="session")
def gauss():
    return gaussian()


@pytest.fixture(scope="session")
def streams():
    return two_stream(v0=2.0, width=1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
