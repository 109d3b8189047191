import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, size, n, max_modulus=0.9):
    rad = max_modulus * np.sqrt(rng.uniform(size=(size, n)))
    return rad * np.exp(2j * np.pi * rng.uniform(size=(size, n)))
