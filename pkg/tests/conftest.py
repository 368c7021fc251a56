import numpy as np
import pytest

from slicelab.rng import Rng


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rng():
    return Rng.derive(12345)


def random_image(np_rng, h=32, w=40):
    return np_rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


@pytest.fixture
def image(np_rng):
    return random_image(np_rng)
