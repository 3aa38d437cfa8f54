"""
Reference optimizers for the placement objective: exhaustive lattice search
and global-best particle swarm optimization.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import structlog

from skyfair.core.config import resolve_threads, settings
from skyfair.core.errors import ConfigurationError
from skyfair.models.learning import CandidateEvaluation, Lattice
from skyfair.models.network import Cell
from skyfair.models.scenario import ExperimentOptions, Scenario
from skyfair.services.objective import PlacementObjective, RankKey, fairness_key

logger = structlog.get_logger(__name__)


def auto_stride(lattice: Lattice, max_candidates: Optional[int] = None) -> int:
    """Smallest stride whose candidate count fits under the cap"""
    cap = max_candidates or settings.EXHAUSTIVE_MAX_CANDIDATES
    stride = 1
    while lattice.count(stride) > cap:
        stride += 1
    return stride


def _rank_chunk(objective: PlacementObjective, cells: Sequence[Cell]) -> Optional[RankKey]:
    best: Optional[RankKey] = None
    for cell in cells:
        key = fairness_key(objective.evaluate(objective.lattice.center(cell), cache=False), cell)
        if best is None or key < best:
            best = key
    return best


def exhaustive_search(
    scenario: Scenario,
    positions: np.ndarray,
    stride: Optional[int] = None,
    i_know_this_is_huge: bool = False,
    threads: Optional[int] = None,
    objective: Optional[PlacementObjective] = None,
) -> CandidateEvaluation:
    """Best feasible cell by fairness over every stride-th lattice cell.

    Ties go to the lexicographically smallest cell. When no candidate is
    feasible the best one is returned flagged infeasible. Chunks may be
    evaluated in parallel; the merge is order-independent.
    """
    objective = objective or PlacementObjective(scenario, positions)
    lattice = objective.lattice
    cap = settings.EXHAUSTIVE_MAX_CANDIDATES
    if stride is None:
        stride = auto_stride(lattice, cap)
    elif stride < 1:
        raise ConfigurationError("must be >= 1", field="stride")
    elif lattice.count(stride) > cap and not i_know_this_is_huge:
        raise ConfigurationError(
            f"{lattice.count(stride)} candidates exceed {cap}; pass --i-know-this-is-huge to proceed",
            field="stride",
        )

    cells = list(lattice.cells(stride))
    workers = min(resolve_threads(threads), len(cells))
    if workers <= 1:
        ranked = [_rank_chunk(objective, cells)]
    else:
        chunks = [cells[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranked = list(pool.map(lambda chunk: _rank_chunk(objective, chunk), chunks))
    best = min(key for key in ranked if key is not None)
    infeasible, _, best_cell = best

    result = objective.candidate("exhaustive", objective.evaluate_cell(best_cell))
    logger.info(
        "exhaustive_complete",
        candidates=len(cells),
        stride=stride,
        workers=workers,
        cell=best_cell,
        theta=result.theta,
        feasible=not infeasible,
    )
    return result


@dataclass
class SwarmResult:
    best_position: np.ndarray
    best_fitness: float
    history: List[float] = field(default_factory=list)
    personal_best: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))


class ParticleSwarm:
    """Global-best PSO maximising a fitness over an axis-aligned box"""

    def __init__(
        self,
        fitness: Callable[[np.ndarray], float],
        lower: Sequence[float],
        upper: Sequence[float],
        swarm: int = 30,
        inertia: float = 0.72,
        cognitive: float = 1.49,
        social: float = 1.49,
        velocity_fraction: float = 0.2,
    ):
        if swarm < 2:
            raise ConfigurationError("must be >= 2", field="pso_swarm")
        self.fitness = fitness
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.swarm = swarm
        self.inertia = inertia
        self.cognitive = cognitive
        self.social = social
        self.v_max = velocity_fraction * (self.upper - self.lower)

    def _evaluate(self, positions: np.ndarray) -> np.ndarray:
        return np.array([self.fitness(p) for p in positions])

    def run(self, iters: int, rng: np.random.Generator) -> SwarmResult:
        """Iteration 1 scores the initial swarm; later iterations move it"""
        if iters < 1:
            raise ConfigurationError("must be >= 1", field="pso_iters")
        dims = self.lower.size
        positions = rng.uniform(self.lower, self.upper, size=(self.swarm, dims))
        velocities = rng.uniform(-self.v_max, self.v_max, size=(self.swarm, dims))

        fitness = self._evaluate(positions)
        p_best, p_best_fit = positions.copy(), fitness.copy()
        g = int(np.argmax(p_best_fit))
        g_best, g_best_fit = p_best[g].copy(), float(p_best_fit[g])
        history = [g_best_fit]

        for _ in range(iters - 1):
            r1 = rng.random((self.swarm, dims))
            r2 = rng.random((self.swarm, dims))
            velocities = (
                self.inertia * velocities
                + self.cognitive * r1 * (p_best - positions)
                + self.social * r2 * (g_best - positions)
            )
            velocities = np.clip(velocities, -self.v_max, self.v_max)
            positions = np.clip(positions + velocities, self.lower, self.upper)

            fitness = self._evaluate(positions)
            improved = fitness > p_best_fit
            p_best[improved] = positions[improved]
            p_best_fit[improved] = fitness[improved]
            g = int(np.argmax(p_best_fit))
            if p_best_fit[g] > g_best_fit:
                g_best, g_best_fit = p_best[g].copy(), float(p_best_fit[g])
            history.append(g_best_fit)

        return SwarmResult(best_position=g_best, best_fitness=g_best_fit, history=history, personal_best=p_best)


def pso_search(
    scenario: Scenario,
    positions: np.ndarray,
    rng: np.random.Generator,
    swarm: int = 30,
    iters: int = 100,
    options: Optional[ExperimentOptions] = None,
    objective: Optional[PlacementObjective] = None,
) -> CandidateEvaluation:
    """PSO over the continuous flight box, scored at the lattice cell under each particle.

    Fitness is theta minus the backhaul penalty at the cell centre. The snapped
    personal bests are re-ranked like the exhaustive search (feasible first,
    then fairness) to pick the returned cell.
    """
    objective = objective or PlacementObjective(scenario, positions)
    config = scenario.config
    region = scenario.region
    lattice = objective.lattice
    kwargs = {}
    if options is not None:
        swarm, iters = options.pso_swarm, options.pso_iters
        kwargs = dict(inertia=options.pso_inertia, cognitive=options.pso_cognitive, social=options.pso_social)

    def fitness(point: np.ndarray) -> float:
        terms = objective.evaluate_cell(lattice.cell_of(point)).terms
        return terms.theta - config.delta1 * terms.beta

    pso = ParticleSwarm(
        fitness,
        lower=(region.x_min, region.y_min, region.h_min),
        upper=(region.x_max, region.y_max, region.h_max),
        swarm=swarm,
        **kwargs,
    )
    outcome = pso.run(iters, rng)
    snapped = {lattice.cell_of(p) for p in outcome.personal_best}
    snapped.add(lattice.cell_of(outcome.best_position))
    cell, score = objective.best_cell(snapped)
    result = objective.candidate(
        "pso",
        score,
        fitness=score.terms.theta - config.delta1 * score.terms.beta,
    ).model_copy(update={"history": outcome.history})
    logger.info("pso_complete", swarm=swarm, iters=iters, cell=cell, theta=result.theta, gbest=outcome.best_fitness)
    return result
