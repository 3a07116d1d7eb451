import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from learnsketch import _backend

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")

# 4x3 integer matrix with golden values from a 50-digit mpmath oracle
GOLD_M = np.array([[2.0, 0, 1], [1, 3, 0], [0, 1, 4], [1, 1, 1]])


@pytest.fixture(params=["numba", "numpy"] if _backend.HAS_NUMBA else ["numpy"])
def backend(request):
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
