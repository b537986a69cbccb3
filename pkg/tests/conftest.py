import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def within_se(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
