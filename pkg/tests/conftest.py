import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mixspec.processes import ProcessSpec

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

NONCAUSAL_COEFFS = (0.1, 0.2, 0.5, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02)


@pytest.fixture
def harris():
    return ProcessSpec(kind="harris_chain", a=1.0)


@pytest.fixture
def doubling():
    return ProcessSpec(kind="doubling_map")


@pytest.fixture
def iid():
    return ProcessSpec(kind="iid_baseline", sigma2=1.0)


@pytest.fixture
def noncausal():
    return ProcessSpec(kind="noncausal_window", window_coeffs=NONCAUSAL_COEFFS)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
