import pytest

from artifact.reflect import ReflectionMetric, build_tube, circle_in_C


@pytest.fixture(scope="session")
def circle_tube():
    return build_tube(circle_in_C(1.0), 0.5)


@pytest.fixture(scope="session")
def circle_refl(circle_tube):
    return ReflectionMetric(circle_tube)
