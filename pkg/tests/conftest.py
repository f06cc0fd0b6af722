import numpy as np
import pytest

from coinv.config import load_config


@pytest.fixture(scope="session")
def example1():
    return load_config("example1.cfg")


@pytest.fixture
def rng():
    return np.random.default_rng(20231017)
