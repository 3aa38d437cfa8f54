"""
Experiment timeline and fairness statistics.

Every t_min the users move, then each enabled arm places its aerial-BS on the
frozen snapshot and the resulting fairness terms and per-user SINRs are logged.
All arms see the same user trajectory: mobility draws from its own stream and
every optimizer from another.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import structlog

from skyfair.core.errors import ConfigurationError, DomainError
from skyfair.models.learning import Lattice
from skyfair.models.metrics import MetricsLog, MetricsRow
from skyfair.models.network import NetworkState
from skyfair.models.scenario import AERIAL_ARMS, ExperimentOptions, Scenario, ScenarioConfig
from skyfair.services.baselines import exhaustive_search, pso_search
from skyfair.services.mobility import TrajectoryRecorder, advance, initial_state
from skyfair.services.objective import PlacementObjective, PlacementScore
from skyfair.services.qplace import QPlacer, QTable, initial_cell
from skyfair.services.scenario import generate_scenario, to_traditional
from skyfair.utils.seeding import SeedStreams

logger = structlog.get_logger(__name__)

# Absolute slack before a learner beating exhaustive search is reported
AUDIT_TOLERANCE = 1e-9


def jain_index(rates) -> float:
    """(sum r)^2 / (n * sum r^2)"""
    r = np.asarray(rates, dtype=float).ravel()
    if r.size == 0:
        raise DomainError("Jain's index needs at least one rate")
    if np.any(r < 0):
        raise DomainError("rates must be non-negative")
    total = r.sum()
    if total <= 0:
        raise DomainError("Jain's index is undefined when every rate is zero")
    return float(total**2 / (r.size * np.sum(r**2)))


class EmpiricalCdf:
    """Right-continuous empirical CDF with nearest-rank percentiles"""

    def __init__(self, samples):
        values = np.sort(np.asarray(samples, dtype=float).ravel())
        if values.size == 0:
            raise DomainError("CDF needs at least one sample")
        self.samples = values

    def __len__(self) -> int:
        return int(self.samples.size)

    def __call__(self, x: float) -> float:
        return float(np.searchsorted(self.samples, x, side="right")) / len(self)

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct values and the cumulative fraction at each"""
        values, counts = np.unique(self.samples, return_counts=True)
        return values, np.cumsum(counts) / len(self)

    def percentile(self, p: float) -> float:
        if not 0 <= p <= 100:
            raise DomainError("percentile must lie in [0, 100]")
        rank = max(1, math.ceil(p * len(self) / 100.0))
        return float(self.samples[rank - 1])


def sinr_cdf(per_user_avg_sinr) -> EmpiricalCdf:
    return EmpiricalCdf(per_user_avg_sinr)


@dataclass
class ArmPlacement:
    """What one arm chose in one session"""
    score: PlacementScore
    position: Optional[Tuple[float, float, float]]


class Experiment:
    """One seeded run of the move-place-measure loop over the enabled arms"""

    def __init__(
        self,
        config: ScenarioConfig,
        options: ExperimentOptions,
        streams: Optional[SeedStreams] = None,
        table_in: Optional[QTable] = None,
        recorder: Optional[TrajectoryRecorder] = None,
    ):
        if options.duration_s < config.t_min_s:
            raise ConfigurationError(
                f"{options.duration_s} s is shorter than one session ({config.t_min_s} s)", field="duration_s"
            )
        self.config = config
        self.options = options
        self.streams = streams or SeedStreams(config.seed)
        self.recorder = recorder
        self.log = MetricsLog()

        self.scenario: Scenario = generate_scenario(config, self.streams.rng("scenario"))
        self.traditional: Scenario = to_traditional(self.scenario)
        self.lattice = Lattice.from_config(config)
        self._mobility = self.streams.rng("mobility")
        self.state: NetworkState = initial_state(self.scenario, self._mobility)

        self._rngs = {
            "saq": self.streams.rng("learning:saq"),
            "egreedy": self.streams.rng("learning:egreedy"),
            "pso": self.streams.rng("pso"),
        }
        self.placers: Dict[str, QPlacer] = {}
        if "saq" in options.arms:
            self.placers["saq"] = QPlacer(self.scenario, policy="metropolis", table=table_in)
        if "egreedy" in options.arms:
            self.placers["egreedy"] = QPlacer(self.scenario, policy="epsilon_greedy")
        start = initial_cell(self.scenario, self.lattice)
        self.cells = {arm: start for arm in self.placers}
        self.placements: Dict[str, ArmPlacement] = {}

    @property
    def sessions(self) -> int:
        return int(math.floor(self.options.duration_s / self.config.t_min_s + 1e-9))

    def _place(self, arm: str, objective: Optional[PlacementObjective]) -> ArmPlacement:
        if arm == "traditional":
            score = PlacementObjective(self.traditional, self.state.positions).evaluate(None)
            return ArmPlacement(score=score, position=None)
        if arm in self.placers:
            session_state = self.state.model_copy(update={"aerial_cell": self.cells[arm]})
            outcome = self.placers[arm].place(self.scenario, session_state, self._rngs[arm], objective=objective)
            self.cells[arm] = outcome.best_cell
            self.log.add_episodes(self.state.t_s, arm, outcome.episode_rewards, outcome.episode_cells)
            logger.info(
                "session_reward",
                arm=arm,
                t_s=self.state.t_s,
                session_reward=outcome.session_reward,
                cells_visited=outcome.cells_visited,
            )
            return ArmPlacement(score=outcome.best_score, position=outcome.best_score.aerial_pos)
        if arm == "pso":
            candidate = pso_search(
                self.scenario, self.state.positions, self._rngs["pso"], options=self.options, objective=objective
            )
        elif arm == "exhaustive":
            candidate = exhaustive_search(
                self.scenario,
                self.state.positions,
                stride=self.options.stride,
                i_know_this_is_huge=self.options.i_know_this_is_huge,
                objective=objective,
            )
        else:
            raise ConfigurationError(f"unknown arm {arm!r}", field="arms")
        return ArmPlacement(score=objective.evaluate(candidate.position), position=candidate.position)

    def _audit(self, t_s: float) -> None:
        best = self.placements.get("exhaustive")
        if best is None:
            return
        for arm in ("saq", "egreedy", "pso"):
            other = self.placements.get(arm)
            if other is not None and other.score.terms.theta > best.score.terms.theta + AUDIT_TOLERANCE:
                logger.warning(
                    "optimality_audit_failed",
                    t_s=t_s,
                    arm=arm,
                    theta=other.score.terms.theta,
                    exhaustive_theta=best.score.terms.theta,
                    stride=self.options.stride,
                )

    def run(self) -> MetricsLog:
        t_min = self.config.t_min_s
        for k in range(1, self.sessions + 1):
            advance(self.state, t_min, self._mobility, self.scenario, self.recorder)
            t_s = k * t_min
            self.state.t_s = t_s
            objective = None
            if any(arm in AERIAL_ARMS for arm in self.options.arms):
                objective = PlacementObjective(self.scenario, self.state.positions)

            for arm in self.options.arms:
                placement = self._place(arm, objective if arm in AERIAL_ARMS else None)
                self.placements[arm] = placement
                terms, rates = placement.score.terms, placement.score.links.rate_bps
                jain = jain_index(rates) if rates.size and rates.sum() > 0 else float("nan")
                row = MetricsRow(
                    t_s=t_s,
                    arm=arm,
                    theta=terms.theta,
                    omega=terms.omega,
                    beta=terms.beta,
                    jain=jain,
                    position=placement.position,
                )
                self.log.add(row, placement.score.links.sinr_db)
                logger.info("session_complete", t_s=t_s, arm=arm, theta=terms.theta, jain=jain)
            self._audit(t_s)
        return self.log


def run_experiment(
    config: ScenarioConfig,
    options: ExperimentOptions,
    streams: Optional[SeedStreams] = None,
    table_in: Optional[QTable] = None,
) -> MetricsLog:
    return Experiment(config, options, streams=streams, table_in=table_in).run()
