"""
Pytest configuration and shared fixtures for the crnt-sim test suite.

This module provides:
- Marker registration (slow, integration) and location-based auto-marking
- Seeded random streams so statistical tests are reproducible
- Preset scenarios and small hand-built road networks
- Default run configurations sized for fast tests
"""

import numpy as np
import pytest

from crnt_sim.core.config import RunConfig
from crnt_sim.mobility.scenario import Scenario, load_scenario

from .utils.test_helpers import junction_scenario, straight_road

# Seed used by every fixture-provided random stream
TEST_SEED = 20240611


class TestConfig:
    """Test configuration constants"""
    SEED = TEST_SEED
    SHORT_RUN_S = 3.0
    RANGE_M = 300.0


@pytest.fixture
def rng() -> np.random.Generator:
    """Fresh seeded generator per test."""
    return np.random.default_rng(TEST_SEED)


@pytest.fixture(scope="session")
def freeway() -> Scenario:
    """The shipped 2 km, 3-lane freeway preset."""
    return load_scenario("freeway")


@pytest.fixture(scope="session")
def cross() -> Scenario:
    """The shipped cross-junction preset (four corner buildings)."""
    return load_scenario("cross")


@pytest.fixture(scope="session")
def golden_junction() -> Scenario:
    """
    Cross junction with three pinned vehicles and no random traffic:
    V5 approaching from the west, V4 at the junction mouth, V3 coming
    down the north road behind the north-west building.
    """
    return junction_scenario()


@pytest.fixture
def short_road() -> Scenario:
    """500 m single-lane road with eight random vehicles."""
    return straight_road(length_m=500.0, lanes=1, count=8)


@pytest.fixture
def run_config() -> RunConfig:
    """Default configuration trimmed to a short run."""
    return RunConfig(duration_s=TestConfig.SHORT_RUN_S, seed=TEST_SEED)


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers and settings"""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests that drive the whole event loop"
    )


def pytest_collection_modifyitems(config, items):
    """Automatically mark tests based on their location"""
    for item in items:
        path = str(item.fspath)
        if "/engine/" in path or path.endswith("test_cli.py"):
            item.add_marker(pytest.mark.integration)

        # Acceptance-scale runs and million-sample checks
        if item.name and ("freeway_scale" in item.name or "million" in item.name):
            item.add_marker(pytest.mark.slow)
