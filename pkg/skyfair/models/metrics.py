from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field


class MetricsRow(BaseModel):
    """One (session, arm) measurement"""
    t_s: float = Field(description="Session timestamp, a multiple of t_min")
    arm: str
    theta: float
    omega: float
    beta: float
    jain: float
    position: Optional[Tuple[float, float, float]] = Field(
        default=None, description="Aerial-BS placement; None for the traditional arm"
    )


class ConvergenceRow(BaseModel):
    """Reward collected by one learning episode of one session"""
    t_s: float
    arm: str
    episode: int = Field(ge=1)
    episode_reward: float
    cells_visited: int = Field(ge=1, description="Distinct cells seen so far in the session")


class MetricsLog(BaseModel):
    """Time series of fairness and reward terms plus per-user SINR samples per arm"""
    rows: List[MetricsRow] = Field(default_factory=list)
    sinr_samples_db: Dict[str, List[List[float]]] = Field(
        default_factory=dict, description="arm -> per-session lists of per-user SINR in dB"
    )
    convergence: List[ConvergenceRow] = Field(default_factory=list)

    def add(self, row: MetricsRow, sinr_db: np.ndarray) -> None:
        self.rows.append(row)
        self.sinr_samples_db.setdefault(row.arm, []).append([float(v) for v in sinr_db])

    def add_episodes(self, t_s: float, arm: str, rewards: Sequence[float], cells: Sequence[int]) -> None:
        for episode, (reward, visited) in enumerate(zip(rewards, cells), start=1):
            self.convergence.append(
                ConvergenceRow(t_s=t_s, arm=arm, episode=episode, episode_reward=reward, cells_visited=visited)
            )

    @property
    def arms(self) -> List[str]:
        seen: List[str] = []
        for row in self.rows:
            if row.arm not in seen:
                seen.append(row.arm)
        return seen

    def series(self, arm: str) -> List[MetricsRow]:
        return [row for row in self.rows if row.arm == arm]

    def average_sinr_db(self, arm: str) -> np.ndarray:
        """Per-user time average of the session SINR samples, in the dB domain"""
        samples = self.sinr_samples_db.get(arm)
        if not samples:
            return np.empty(0)
        return np.mean(np.asarray(samples, dtype=float), axis=0)


class RunManifest(BaseModel):
    """Everything needed to reproduce a run"""
    subcommand: str
    seed: int
    version: str
    output_dir: str
    config: Dict[str, Any] = Field(description="Resolved scenario config snapshot (file keys)")
    options: Dict[str, Any] = Field(description="Resolved experiment options")
    qtable_in: Optional[str] = None
    qtable_out: Optional[str] = None
    artifacts: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256 of each artifact")
