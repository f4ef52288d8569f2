import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
