import numpy as np
import pytest

from helpers import desk_spec
from maxentchain import complete_bernoulli


@pytest.fixture
def desk():
    return desk_spec()


@pytest.fixture
def desk_chain(desk):
    return complete_bernoulli(desk)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
