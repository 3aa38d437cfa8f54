"""
Destination-choice pedestrian mobility.

Each leg targets one of the nu attraction points or a fresh uniform point,
all nu+1 outcomes equiprobable, and is walked in a straight line at a speed
drawn once per leg from (0, max_speed]. Arrival triggers an immediate redraw.
"""
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import structlog

from skyfair.models.network import NetworkState
from skyfair.models.scenario import Point2D, Region, Scenario

logger = structlog.get_logger(__name__)

PEDESTRIAN_MAX_SPEED_MPS = 1.3


class Leg(NamedTuple):
    destination: Point2D
    speed: float
    attractor: int  # -1 for a random point


def choose_destination(
    attractors: Sequence[Point2D],
    region: Region,
    rng: np.random.Generator,
    max_speed: float = PEDESTRIAN_MAX_SPEED_MPS,
) -> Leg:
    nu = len(attractors)
    pick = int(rng.integers(nu + 1))
    if pick < nu:
        destination = (float(attractors[pick][0]), float(attractors[pick][1]))
        attractor = pick
    else:
        destination = (
            float(rng.uniform(region.x_min, region.x_max)),
            float(rng.uniform(region.y_min, region.y_max)),
        )
        attractor = -1
    # 1 - U(0,1) lies in (0, 1], so speed is never exactly zero
    speed = max_speed * (1.0 - float(rng.random()))
    return Leg(destination, speed, attractor)


def initial_state(scenario: Scenario, rng: np.random.Generator) -> NetworkState:
    """Users at their generated positions, each with a first leg drawn"""
    config = scenario.config
    n = scenario.num_users
    positions = np.asarray(scenario.user_positions, dtype=float).reshape(n, 2)
    state = NetworkState(
        positions=positions,
        destinations=np.empty((n, 2)),
        speeds=np.empty(n),
        arrived=np.zeros(n, dtype=bool),
        destination_kind=np.empty(n, dtype=np.int64),
    )
    for i in range(n):
        _assign_leg(state, i, choose_destination(scenario.attractors, scenario.region, rng, config.max_speed_mps))
    return state


def _assign_leg(state: NetworkState, user: int, leg: Leg) -> None:
    state.destinations[user] = leg.destination
    state.speeds[user] = leg.speed
    state.destination_kind[user] = leg.attractor
    if leg.attractor >= 0:
        state.attractor_legs += 1
    else:
        state.random_legs += 1


def step_users(state: NetworkState, dt: float, rng: np.random.Generator, scenario: Scenario) -> NetworkState:
    """Advance every user by min(speed*dt, remaining distance) towards its destination"""
    if dt <= 0:
        raise ValueError("dt must be positive")
    region = scenario.region
    delta = state.destinations - state.positions
    remaining = np.hypot(delta[:, 0], delta[:, 1])
    travel = np.minimum(state.speeds * dt, remaining)
    arrived = travel >= remaining

    moving = ~arrived
    frac = np.zeros_like(remaining)
    frac[moving] = travel[moving] / remaining[moving]
    state.positions = state.positions + frac[:, None] * delta
    state.positions[arrived] = state.destinations[arrived]
    np.clip(state.positions[:, 0], region.x_min, region.x_max, out=state.positions[:, 0])
    np.clip(state.positions[:, 1], region.y_min, region.y_max, out=state.positions[:, 1])
    state.arrived = arrived

    for user in np.flatnonzero(arrived):
        leg = choose_destination(scenario.attractors, region, rng, scenario.config.max_speed_mps)
        _assign_leg(state, int(user), leg)
    state.t_s += dt
    return state


class TrajectoryRecorder:
    """Collects t_s,user_id,x_m,y_m rows while users move"""

    def __init__(self, every_s: float = 1.0):
        self.every_s = every_s
        self.rows: List[Tuple[float, int, float, float]] = []
        self._next_t = every_s

    def observe(self, state: NetworkState) -> None:
        if state.t_s + 1e-9 < self._next_t:
            return
        for user, (x, y) in enumerate(state.positions):
            self.rows.append((state.t_s, user, float(x), float(y)))
        while self._next_t <= state.t_s + 1e-9:
            self._next_t += self.every_s


def advance(
    state: NetworkState,
    duration_s: float,
    rng: np.random.Generator,
    scenario: Scenario,
    recorder: Optional[TrajectoryRecorder] = None,
) -> NetworkState:
    """Integrate mobility for duration_s in ticks of the configured dt"""
    dt = scenario.config.dt_s
    ticks = int(np.floor(duration_s / dt + 1e-9))
    for _ in range(ticks):
        step_users(state, dt, rng, scenario)
        if recorder is not None:
            recorder.observe(state)
    leftover = duration_s - ticks * dt
    if leftover > 1e-9:
        step_users(state, leftover, rng, scenario)
        if recorder is not None:
            recorder.observe(state)
    logger.debug("users_advanced", t_s=state.t_s, attractor_legs=state.attractor_legs, random_legs=state.random_legs)
    return state


def attractor_occupancy(state: NetworkState, attractors: Sequence[Point2D], radius_m: float) -> float:
    """Fraction of users within radius_m of any attraction point"""
    if not len(attractors) or state.num_users == 0:
        return 0.0
    pts = np.asarray(attractors, dtype=float)
    d = np.hypot(
        state.positions[:, None, 0] - pts[None, :, 0],
        state.positions[:, None, 1] - pts[None, :, 1],
    )
    return float(np.mean(d.min(axis=1) <= radius_m))
