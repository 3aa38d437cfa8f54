"""
Shared pytest fixtures
"""
import numpy as np
import pytest

from skyfair.core.config import resolve_config
from skyfair.models import ScenarioConfig
from skyfair.services.scenario import generate_scenario, with_users


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo or acceptance-scale runs")


# 3x3x1 lattice of 10 m cubes, one ground-BS (the backhaul anchor) and one user
TINY = dict(
    j=1,
    m_min=1,
    m_max=1,
    nu=0,
    x_min_m=-15.0,
    x_max_m=15.0,
    y_min_m=-15.0,
    y_max_m=15.0,
    h_min_m=25.0,
    h_max_m=35.0,
    upsilon_m=10.0,
    c_zeta_bps=1e12,
)


@pytest.fixture
def tiny_config() -> ScenarioConfig:
    return ScenarioConfig(**TINY)


@pytest.fixture
def tiny_scenario(tiny_config):
    """Aerial-only world with its single user under cell (2, 2, 0)"""
    scenario = generate_scenario(tiny_config, np.random.default_rng(0))
    return with_users(scenario, [(10.0, 10.0)])


@pytest.fixture
def desk_config() -> ScenarioConfig:
    config, _ = resolve_config(preset="desk", overrides={"seed": 3})
    return config


@pytest.fixture
def desk_scenario(desk_config):
    return generate_scenario(desk_config, np.random.default_rng(3))


@pytest.fixture
def desk_users(desk_scenario) -> np.ndarray:
    return np.asarray(desk_scenario.user_positions, dtype=float)
