"""
World generation: ground-BSs, attraction points and users as independent
binomial point processes over the region footprint.
"""
from typing import Sequence, Tuple

import numpy as np
import structlog

from skyfair.core.errors import ConfigurationError
from skyfair.models.scenario import GroundBS, Point2D, Scenario, ScenarioConfig

logger = structlog.get_logger(__name__)


def _uniform_points(rng: np.random.Generator, config: ScenarioConfig, count: int) -> Tuple[Point2D, ...]:
    region = config.region
    pts = rng.uniform(
        low=(region.x_min, region.y_min),
        high=(region.x_max, region.y_max),
        size=(count, 2),
    )
    return tuple((float(x), float(y)) for x, y in pts)


def _anchor_index(positions: Sequence[Point2D], centroid: Point2D) -> int:
    """Ground-BS nearest the region centroid; ties go to the lowest id"""
    cx, cy = centroid
    dist = [(x - cx) ** 2 + (y - cy) ** 2 for x, y in positions]
    return int(np.argmin(dist))


def generate_scenario(config: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    """Aerial-mode scenario; identical (config, stream state) gives an identical world"""
    bs_rng, attractor_rng, user_rng = rng.spawn(3)

    bs_positions = _uniform_points(bs_rng, config, config.j)
    attractors = _uniform_points(attractor_rng, config, config.nu)
    num_users = int(user_rng.integers(config.m_min, config.m_max, endpoint=True))
    users = _uniform_points(user_rng, config, num_users)

    anchor = _anchor_index(bs_positions, config.region.centroid)
    ground = tuple(
        GroundBS(
            id=i,
            position=pos,
            tx_power_dbm=config.p_max_dbm,
            height_m=config.ground_bs_height_m,
            is_backhaul_anchor=(i == anchor),
        )
        for i, pos in enumerate(bs_positions)
    )
    logger.debug(
        "scenario_generated",
        ground_bss=len(ground),
        attractors=len(attractors),
        users=num_users,
        anchor=anchor,
    )
    return Scenario(
        config=config,
        mode="aerial",
        ground_bss=ground,
        attractors=attractors,
        user_positions=users,
    )


def to_traditional(scenario: Scenario) -> Scenario:
    """Return the anchor to user-serving duty and drop the aerial-BS"""
    if scenario.mode == "traditional":
        return scenario
    ground = tuple(bs.model_copy(update={"is_backhaul_anchor": False}) for bs in scenario.ground_bss)
    return scenario.model_copy(update={"mode": "traditional", "ground_bss": ground})


def with_users(scenario: Scenario, positions: Sequence[Point2D]) -> Scenario:
    """Same world with a different user population (e.g. from a snapshot file)"""
    region = scenario.region
    users = tuple((float(x), float(y)) for x, y in positions)
    outside = [i for i, (x, y) in enumerate(users) if not region.contains(x, y)]
    if outside:
        raise ConfigurationError(f"user {outside[0]} lies outside the region", field="snapshot")
    return scenario.model_copy(update={"user_positions": users})


def serving_count(scenario: Scenario) -> int:
    """Ground-BSs serving users plus the aerial-BS in aerial mode"""
    aerial = 1 if scenario.mode == "aerial" else 0
    return len(scenario.serving_ground) + aerial
