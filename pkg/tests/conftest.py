import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlkg.config import lab_for
from nlkg.rng import SplitMix64, random_state

# frame-backed properties are slow per example, so the default profile is small
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("dev", max_examples=5, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("thorough", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def lab():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lab = lab_for()
        lab.frame  # build once
    return lab


@pytest.fixture(scope="session")
def grid(lab):
    return lab.grid


@pytest.fixture(scope="session")
def family(lab):
    return lab.family


@pytest.fixture(scope="session")
def frame(lab):
    return lab.frame


@pytest.fixture
def rand_state(grid):
    """Factory: seeded smooth random State with optional H-norm."""

    def make(seed, norm=None):
        return random_state(SplitMix64(seed), grid, norm=norm)

    return make


def hnorm(frame, a):
    return float(np.sqrt(frame.hnorm2_arr(np.asarray(a))))
