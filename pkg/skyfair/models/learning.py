import math
from enum import IntEnum
from typing import Iterator, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from skyfair.models.network import Cell
from skyfair.models.scenario import ScenarioConfig


class Action(IntEnum):
    """Move the aerial-BS one pitch towards a face of its cube"""
    PLUS_X = 0
    MINUS_X = 1
    PLUS_Y = 2
    MINUS_Y = 3
    PLUS_Z = 4
    MINUS_Z = 5

    @property
    def delta(self) -> Cell:
        return _DELTAS[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Action":
        try:
            return cls(_LABELS.index(label))
        except ValueError:
            raise ValueError(f"unknown action label {label!r}") from None


_DELTAS: Tuple[Cell, ...] = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
_LABELS: Tuple[str, ...] = ("+x", "-x", "+y", "-y", "+z", "-z")
NUM_ACTIONS = len(Action)


class Lattice(BaseModel):
    """Cubic discretisation of the flight zone; cell centers are the learning states"""
    model_config = ConfigDict(frozen=True)

    x_min: float
    y_min: float
    h_min: float
    upsilon: float = Field(gt=0)
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    nz: int = Field(ge=1)

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "Lattice":
        region = config.region
        pitch = config.upsilon_m
        return cls(
            x_min=region.x_min,
            y_min=region.y_min,
            h_min=region.h_min,
            upsilon=pitch,
            nx=round((region.x_max - region.x_min) / pitch),
            ny=round((region.y_max - region.y_min) / pitch),
            nz=round((region.h_max - region.h_min) / pitch),
        )

    @property
    def dims(self) -> Cell:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    def contains(self, cell: Cell) -> bool:
        ix, iy, iz = cell
        return 0 <= ix < self.nx and 0 <= iy < self.ny and 0 <= iz < self.nz

    def center(self, cell: Cell) -> np.ndarray:
        ix, iy, iz = cell
        return np.array(
            [
                self.x_min + (ix + 0.5) * self.upsilon,
                self.y_min + (iy + 0.5) * self.upsilon,
                self.h_min + (iz + 0.5) * self.upsilon,
            ]
        )

    def cell_of(self, point) -> Cell:
        """Cell containing (or nearest to) a 3D point"""
        origin = (self.x_min, self.y_min, self.h_min)
        idx = []
        for value, lo, n in zip(point, origin, self.dims):
            i = math.floor((float(value) - lo) / self.upsilon)
            idx.append(min(max(i, 0), n - 1))
        return (idx[0], idx[1], idx[2])

    def cells(self, stride: int = 1) -> Iterator[Cell]:
        """Every stride-th cell per axis, in lexicographic order"""
        for ix in range(0, self.nx, stride):
            for iy in range(0, self.ny, stride):
                for iz in range(0, self.nz, stride):
                    yield (ix, iy, iz)

    def count(self, stride: int = 1) -> int:
        return math.ceil(self.nx / stride) * math.ceil(self.ny / stride) * math.ceil(self.nz / stride)


class LearnParams(BaseModel):
    """Learning-rate schedule, discount, annealing and session shape"""
    model_config = ConfigDict(frozen=True)

    alpha_exponent: float = Field(default=0.85, gt=0, le=1)
    eta: float = Field(default=0.9, ge=0, lt=1)
    psi0: float = Field(default=10.0, gt=0)
    lambda_: float = Field(default=0.99, gt=0, lt=1)
    episodes: int = 50
    steps_per_episode: int = 100
    policy: Literal["metropolis", "epsilon_greedy"] = "metropolis"
    epsilon: float = Field(default=0.1, ge=0, le=1)
    update_form: Literal["standard", "printed"] = "standard"
    climb_restarts: int = Field(default=50, ge=0)

    @classmethod
    def from_config(cls, config: ScenarioConfig, policy: Optional[str] = None) -> "LearnParams":
        return cls(
            alpha_exponent=config.alpha_exponent,
            eta=config.eta,
            psi0=config.psi0,
            lambda_=config.lambda_,
            episodes=config.episodes,
            steps_per_episode=config.steps_per_episode,
            policy=policy or config.policy,
            epsilon=config.epsilon,
            update_form=config.q_update_form,
            climb_restarts=config.climb_restarts,
        )

    def learning_rate(self, visits: int) -> float:
        return 1.0 / (1.0 + visits) ** self.alpha_exponent


class RewardTerms(BaseModel):
    """Fairness, SINR bonus and backhaul penalty of one iteration with the shaped reward"""
    theta: float = Field(description="Proportional fairness in nats")
    omega: float = Field(description="Sum of linear SINRs of rate-satisfied users")
    beta: float = Field(description="Backhaul penalty, 0 or eta1")
    r_plus: float = 0.0
    r_minus: float = 0.0
    r: float = 0.0

    def potential(self, delta1: float) -> float:
        """Quantity whose differences the reward telescopes"""
        return self.theta + self.omega - delta1 * self.beta


class ConstraintReport(BaseModel):
    """Feasibility of a placement against the backhaul, rate and power constraints"""
    backhaul_load_bps: float
    backhaul_cap_bps: float
    backhaul_ok: bool
    min_rate_bps: Optional[float] = Field(default=None, description="Lowest served rate")
    r_min_bps: float
    rate_ok: bool
    aerial_power_dbm: float
    p_max_dbm: float
    power_ok: bool = True
    power_margin_db: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.backhaul_ok and self.rate_ok and self.power_ok

    @property
    def backhaul_margin_bps(self) -> float:
        return self.backhaul_cap_bps - self.backhaul_load_bps

    @property
    def rate_margin_bps(self) -> Optional[float]:
        if self.min_rate_bps is None:
            return None
        return self.min_rate_bps - self.r_min_bps


class CandidateEvaluation(BaseModel):
    """One aerial placement scored under the shared objective"""
    method: str
    cell: Optional[Cell] = None
    position: Tuple[float, float, float]
    theta: float
    omega: float = 0.0
    beta: float = 0.0
    fitness: float = Field(default=0.0, description="Optimizer-specific score of the candidate")
    feasible: bool = True
    backhaul_margin_bps: float = 0.0
    rate_margin_bps: Optional[float] = None
    power_margin_db: float = 0.0
    history: List[float] = Field(default_factory=list, description="Best fitness per iteration")
