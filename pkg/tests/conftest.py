"""Shared fixtures for the nanotx test suite."""

import numpy as np
import pytest

from nanotx import SystemConfig, derive_constants


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def dc(cfg):
    return derive_constants(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
