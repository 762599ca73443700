import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("jumpcal", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("jumpcal")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def day():
    return dt.date(2020, 1, 2)
