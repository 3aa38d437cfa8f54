from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from skyfair.models.scenario import Point2D

Cell = Tuple[int, int, int]


class UserMotion(BaseModel):
    """Per-user mobility state"""
    position: Point2D = Field(description="Current position in meters")
    destination: Point2D = Field(description="Current leg destination in meters")
    speed: float = Field(gt=0, description="Leg speed in m/s, bounded by the pedestrian maximum")
    arrived: bool = Field(default=False, description="Reached destination on the last tick")


class AssociationMatrix(BaseModel):
    """Sparse encoding of the binary association matrix U: user id -> serving BS id"""
    model_config = ConfigDict(frozen=True)

    serving: Dict[int, int] = Field(default_factory=dict)

    def bs_of(self, user_id: int) -> int:
        return self.serving[user_id]

    def users_of(self, bs_id: int) -> List[int]:
        return [user for user, bs in self.serving.items() if bs == bs_id]

    def load(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for bs in self.serving.values():
            counts[bs] = counts.get(bs, 0) + 1
        return counts

    def as_array(self, num_users: int) -> np.ndarray:
        out = np.full(num_users, -1, dtype=np.int64)
        for user, bs in self.serving.items():
            out[user] = bs
        return out

    @classmethod
    def from_array(cls, serving_bs: np.ndarray) -> "AssociationMatrix":
        return cls(serving={int(i): int(bs) for i, bs in enumerate(serving_bs)})


class LinkReport(BaseModel):
    """Downlink quality of one user towards its serving BS"""
    user_id: int
    serving_bs_id: int
    path_loss_db: float
    rx_power_dbm: float
    sinr: float = Field(ge=0, description="Linear SINR")
    rate_bps: float = Field(ge=0)
    bandwidth_hz: float = Field(gt=0, description="Bandwidth share of the user")

    @property
    def sinr_db(self) -> float:
        return float(10.0 * np.log10(self.sinr)) if self.sinr > 0 else float("-inf")


class NetworkState(BaseModel):
    """Mutable per-tick state; arrays are indexed by user id"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    t_s: float = 0.0
    positions: np.ndarray
    destinations: np.ndarray
    speeds: np.ndarray
    arrived: np.ndarray
    # -1 marks a random-point leg, k >= 0 the k-th attraction point
    destination_kind: np.ndarray
    attractor_legs: int = 0
    random_legs: int = 0
    aerial_cell: Optional[Cell] = None
    association: Optional[AssociationMatrix] = None

    @property
    def num_users(self) -> int:
        return int(self.positions.shape[0])

    def users(self) -> List[UserMotion]:
        return [
            UserMotion(
                position=(float(p[0]), float(p[1])),
                destination=(float(d[0]), float(d[1])),
                speed=float(s),
                arrived=bool(a),
            )
            for p, d, s, a in zip(self.positions, self.destinations, self.speeds, self.arrived)
        ]

    def snapshot(self) -> "NetworkState":
        """Deep copy, so later mobility ticks leave the copy untouched"""
        return self.model_copy(
            update={
                "positions": self.positions.copy(),
                "destinations": self.destinations.copy(),
                "speeds": self.speeds.copy(),
                "arrived": self.arrived.copy(),
                "destination_kind": self.destination_kind.copy(),
            }
        )
