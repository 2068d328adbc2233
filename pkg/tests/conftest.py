import numpy as np
import pytest

from hawkesvol.model import default_params, example_laws


@pytest.fixture
def defaults():
    return default_params()


@pytest.fixture(params=sorted(example_laws()))
def law_name(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
