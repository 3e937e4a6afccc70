import numpy as np
import pytest

from shapereg.scenarios import template_circle
from shapereg.types import ShootConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def circle100():
    return template_circle(100)


@pytest.fixture(scope="session")
def circle48():
    return template_circle(48)


@pytest.fixture(scope="session")
def cfg_default():
    return ShootConfig()


@pytest.fixture(scope="session")
def cfg_fast():
    return ShootConfig(steps=20)


def knots(n):
    return 2.0 * np.pi * np.arange(n) / n
