from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from srivc.ctlti import tf_from_theta

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

THETA_STAR = np.array([0.04, 0.2, 1.0])


@pytest.fixture(scope="session")
def canonical_system():
    """Second-order unit-gain test system used throughout the suite."""
    return tf_from_theta(THETA_STAR, 2, 0)


@pytest.fixture(scope="session")
def theta_star():
    return THETA_STAR.copy()
