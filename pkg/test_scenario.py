#!/usr/bin/env python3
"""
Tests for world generation and the traditional-mode switch
"""
import numpy as np
import pytest

from skyfair.core.errors import ConfigurationError
from skyfair.models import ScenarioConfig
from skyfair.services.scenario import generate_scenario, serving_count, to_traditional, with_users


def test_generation_is_reproducible(desk_config):
    a = generate_scenario(desk_config, np.random.default_rng(11))
    b = generate_scenario(desk_config, np.random.default_rng(11))
    assert a == b


def test_counts_and_region(desk_config):
    scenario = generate_scenario(desk_config, np.random.default_rng(5))
    assert len(scenario.ground_bss) == desk_config.j
    assert len(scenario.attractors) == desk_config.nu
    assert desk_config.m_min <= scenario.num_users <= desk_config.m_max
    region = scenario.region
    for x, y in scenario.user_positions + scenario.attractors:
        assert region.contains(x, y)
    assert all(bs.tx_power_dbm == desk_config.p_max_dbm for bs in scenario.ground_bss)


def test_exactly_one_anchor_nearest_centroid(desk_scenario):
    anchors = [bs for bs in desk_scenario.ground_bss if bs.is_backhaul_anchor]
    assert len(anchors) == 1
    cx, cy = desk_scenario.region.centroid
    dist = [np.hypot(bs.position[0] - cx, bs.position[1] - cy) for bs in desk_scenario.ground_bss]
    assert anchors[0].id == int(np.argmin(dist))


def test_user_count_spans_configured_range():
    config = ScenarioConfig(m_min=200, m_max=300)
    counts = {generate_scenario(config, np.random.default_rng(seed)).num_users for seed in range(30)}
    assert min(counts) >= 200 and max(counts) <= 300
    assert len(counts) > 1


def test_no_attractors_allowed():
    scenario = generate_scenario(ScenarioConfig(nu=0), np.random.default_rng(0))
    assert scenario.attractors == ()


def test_traditional_mode_returns_anchor_to_service(desk_scenario):
    assert serving_count(desk_scenario) == len(desk_scenario.ground_bss)  # j-1 ground + aerial
    trad = to_traditional(desk_scenario)
    assert trad.mode == "traditional"
    assert trad.anchor is None
    assert len(trad.serving_ground) == len(desk_scenario.ground_bss)
    assert serving_count(trad) == len(desk_scenario.ground_bss)
    assert to_traditional(trad) == trad


def test_with_users_rejects_points_outside(desk_scenario):
    with pytest.raises(ConfigurationError) as exc:
        with_users(desk_scenario, [(0.0, 0.0), (5000.0, 0.0)])
    assert exc.value.field == "snapshot"


def test_invalid_config_names_the_field():
    with pytest.raises(ConfigurationError) as exc:
        ScenarioConfig(m_min=10, m_max=5)
    assert exc.value.field == "m_min"
    with pytest.raises(ConfigurationError) as exc:
        ScenarioConfig(upsilon_m=7.0)
    assert exc.value.field == "upsilon_m"


# upper 1% point of the chi-square distribution with 100 degrees of freedom
CHI2_100_UPPER_1PCT = 135.807


@pytest.fixture(scope="module")
def draws():
    """Summary of 10^4 full-scale scenarios, one per seed"""
    config = ScenarioConfig(m_min=200, m_max=300)
    region = config.region
    counts, firsts, inside = [], [], True
    for seed in range(10_000):
        scenario = generate_scenario(config, np.random.default_rng(seed))
        counts.append(scenario.num_users)
        firsts.append((scenario.ground_bss[0].position, scenario.attractors[0], scenario.user_positions[0]))
        points = [bs.position for bs in scenario.ground_bss] + list(scenario.attractors + scenario.user_positions)
        inside = inside and all(region.contains(x, y) for x, y in points)
    return config, np.array(counts), np.array(firsts, dtype=float), inside


@pytest.mark.slow
def test_user_count_is_uniform(draws):
    config, counts, _, _ = draws
    observed = np.bincount(counts - config.m_min, minlength=config.m_max - config.m_min + 1)
    assert observed.size == 101
    expected = counts.size / observed.size
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    assert chi2 < CHI2_100_UPPER_1PCT


@pytest.mark.slow
def test_point_sets_are_independent(draws):
    # firsts[:, k] is the first ground-BS, attractor and user of each seed
    _, _, firsts, _ = draws
    for axis in (0, 1):
        coords = firsts[:, :, axis]
        r = np.corrcoef(coords.T)
        assert np.all(np.abs(r[np.triu_indices(3, k=1)]) < 0.05)


@pytest.mark.slow
def test_every_point_lies_in_the_region(draws):
    _, _, _, inside = draws
    assert inside
