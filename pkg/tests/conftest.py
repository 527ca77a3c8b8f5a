import pytest
from hypothesis import HealthCheck, settings

from oracles import FIXTURES

settings.register_profile(
    "nfforge",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("nfforge")


@pytest.fixture
def fixtures_dir():
    return FIXTURES
