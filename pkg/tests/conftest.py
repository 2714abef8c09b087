import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quenched.acceptance import bump_system, constant_ceiling
from quenched.dynamics import CocycleContext, doubling, doubling_cosine
from quenched.noise import doubling_cosine_family, sample_path

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def dc():
    return doubling_cosine()


@pytest.fixture
def bump():
    return bump_system()


@pytest.fixture
def const_tau():
    return constant_ceiling()


@pytest.fixture
def family():
    return doubling_cosine_family()


@pytest.fixture
def path(family):
    return sample_path(3, 200, family.d)


@pytest.fixture
def noisy(family, path):
    """Doubling+cosine family at eps = 0.05 along a fixed path."""
    return CocycleContext(family.base, family, path, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
