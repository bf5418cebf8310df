import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qheat", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qheat")


@pytest.fixture
def no_warnings():
    """Fail on any warning raised inside the test body."""
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield
