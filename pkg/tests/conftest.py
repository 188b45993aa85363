"""Shared fixtures and hypothesis settings for the test suite."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from splitscore.randgen import Dataset

# Numerical property tests can be slow on a loaded machine; wall-clock
# deadlines only produce flaky failures there.
settings.register_profile(
    "ci",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_dataset(design, response, **kwargs) -> Dataset:
    return Dataset(
        design=np.asarray(design, dtype=float),
        response=np.asarray(response, dtype=float),
        **kwargs,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
