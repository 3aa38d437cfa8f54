"""
SA-Q-learning placement engine.

States are lattice cells, actions move the aerial-BS one pitch towards a cube
face. Exploration follows a Metropolis criterion whose temperature decays
geometrically per step (or plain epsilon-greedy for the baseline arm). After
learning, the session placement is the best-ranked summit of fairness ascents
started from the greedy rollout, the learning incumbent and random cells. The
Q-table is sparse and persists between sessions as a line-oriented text file.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import structlog

from skyfair.core.errors import ConfigurationError, QTableIncompatibleError, QTableParseError, StateError
from skyfair.models.learning import NUM_ACTIONS, Action, Lattice, LearnParams, RewardTerms
from skyfair.models.network import Cell, NetworkState
from skyfair.models.scenario import Scenario
from skyfair.services.objective import PlacementObjective, PlacementScore, reward_from_terms

logger = structlog.get_logger(__name__)

QTABLE_SCHEMA = "QTABLE v1"

# Long sessions would otherwise underflow the temperature to exactly zero
PSI_FLOOR = 1e-300

PathLike = Union[str, Path]


class QTable:
    """Sparse (cell, action) -> value map with visit counts; unvisited pairs read as 0"""

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self._values: Dict[Tuple[Cell, int], float] = {}
        self._visits: Dict[Tuple[Cell, int], int] = {}

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return (
            self.lattice == other.lattice
            and self._values == other._values
            and self._visits == other._visits
        )

    def get(self, cell: Cell, action: int) -> float:
        return self._values.get((cell, int(action)), 0.0)

    def visits(self, cell: Cell, action: int) -> int:
        return self._visits.get((cell, int(action)), 0)

    def set(self, cell: Cell, action: int, value: float, visits: Optional[int] = None) -> None:
        if not math.isfinite(value):
            raise StateError(f"non-finite Q-value for {cell} {Action(action).label}")
        key = (tuple(int(i) for i in cell), int(action))
        self._values[key] = float(value)
        if visits is not None:
            self._visits[key] = int(visits)
        else:
            self._visits.setdefault(key, 0)

    def values(self, cell: Cell) -> np.ndarray:
        return np.array([self.get(cell, a) for a in range(NUM_ACTIONS)])

    def best_action(self, cell: Cell) -> Action:
        """argmax over actions; ties go to the lowest action index"""
        return Action(int(np.argmax(self.values(cell))))

    def max_value(self, cell: Cell) -> float:
        return float(self.values(cell).max())

    def cells(self) -> List[Cell]:
        return sorted({cell for cell, _ in self._values})

    def rows(self) -> Iterator[Tuple[Cell, Action, float, int]]:
        """Stored pairs in lexicographic (cell, action) order"""
        for cell, action in sorted(self._values):
            yield cell, Action(action), self._values[(cell, action)], self._visits.get((cell, action), 0)


def metropolis_accept(delta_q: float, psi: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp(delta_q / psi))"""
    if psi <= 0:
        raise ValueError("temperature must be positive")
    eps = float(rng.random())
    return eps < math.exp(min(delta_q / psi, 0.0))


def select_action_metropolis(q: QTable, s: Cell, psi: float, rng: np.random.Generator) -> Action:
    """Random action a_r against the greedy a_p, accepted by the Metropolis criterion"""
    a_r = Action(int(rng.integers(NUM_ACTIONS)))
    values = q.values(s)
    a_p = Action(int(np.argmax(values)))
    if metropolis_accept(values[a_r] - values[a_p], psi, rng):
        return a_r
    return a_p


def select_action_epsilon(q: QTable, s: Cell, epsilon: float, rng: np.random.Generator) -> Action:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if float(rng.random()) < epsilon:
        return Action(int(rng.integers(NUM_ACTIONS)))
    return q.best_action(s)


def apply_action(lattice: Lattice, s: Cell, a: Action) -> Cell:
    """Neighbour cell along a; a move off the lattice leaves s unchanged"""
    dx, dy, dz = Action(a).delta
    nxt = (s[0] + dx, s[1] + dy, s[2] + dz)
    return nxt if lattice.contains(nxt) else s


def q_update(
    q: QTable,
    s: Cell,
    a: Action,
    r: float,
    s_next: Cell,
    alpha: float,
    eta: float,
    form: str = "standard",
) -> QTable:
    """One temporal-difference update of Q(s, a); bumps the visit count"""
    if not math.isfinite(r):
        raise StateError(f"non-finite reward {r!r} at {s}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    current = q.get(s, a)
    td = r + eta * q.max_value(s_next) - current
    if form == "standard":
        value = current + alpha * td
    elif form == "printed":
        value = alpha * td
    else:
        raise ConfigurationError(f"unknown update form {form!r}", field="q_update_form")
    q.set(s, a, value, visits=q.visits(s, a) + 1)
    return q


def psi_schedule(psi0: float, lambda_: float, steps: int) -> np.ndarray:
    """Temperatures seen by the first `steps` action selections of a session"""
    return psi0 * lambda_ ** np.arange(steps)


def initial_cell(scenario: Scenario, lattice: Lattice) -> Cell:
    """Lowest lattice layer above the backhaul anchor (region centroid without one)"""
    anchor = scenario.anchor
    x, y = anchor.position if anchor is not None else scenario.region.centroid
    return lattice.cell_of((x, y, lattice.h_min))


def rollout_path(q: QTable, start: Cell, max_steps: Optional[int] = None) -> List[Cell]:
    """Cells reached by following argmax actions until a clamp or a revisit"""
    lattice = q.lattice
    limit = max_steps if max_steps is not None else 2 * (lattice.nx + lattice.ny + lattice.nz)
    path = [start]
    seen = {start}
    s = start
    for _ in range(limit):
        nxt = apply_action(lattice, s, q.best_action(s))
        if nxt in seen:
            break
        path.append(nxt)
        seen.add(nxt)
        s = nxt
    return path


def greedy_rollout(
    q: QTable,
    objective: PlacementObjective,
    start: Cell,
    max_steps: Optional[int] = None,
) -> Tuple[Cell, PlacementScore]:
    """Follow argmax actions from start; return the best-ranked cell on the path"""
    return objective.best_cell(rollout_path(q, start, max_steps))


def climb_fairness(objective: PlacementObjective, start: Cell) -> Tuple[Cell, PlacementScore]:
    """Steepest ascent over the action neighbourhood until no neighbour ranks better"""
    lattice = objective.lattice
    key = objective.rank(start)
    while True:
        best = min(objective.rank(apply_action(lattice, key[2], a)) for a in Action)
        if best >= key:
            break
        key = best
    return key[2], objective.evaluate_cell(key[2])


def extract_placement(
    q: QTable,
    objective: PlacementObjective,
    start: Cell,
    rng: np.random.Generator,
    restarts: int = 0,
    incumbent: Optional[Cell] = None,
) -> Tuple[Cell, PlacementScore]:
    """Placement chosen at the end of a session.

    Fairness ascents start from the best rollout cell, from the incumbent
    (best cell scored while learning) and from `restarts` uniformly drawn
    cells. The best-ranked summit wins, so the result is never ranked below
    the rollout or the incumbent.
    """
    lattice = q.lattice
    seeds = [greedy_rollout(q, objective, start)[0]]
    if incumbent is not None:
        seeds.append(incumbent)
    if restarts > 0:
        draws = rng.integers(0, lattice.dims, size=(restarts, 3))
        seeds.extend((int(ix), int(iy), int(iz)) for ix, iy, iz in draws)
    summits = {climb_fairness(objective, seed)[0] for seed in seeds}
    return objective.best_cell(summits)


@dataclass
class SessionOutcome:
    """Result of one learning session"""
    q: QTable
    best_cell: Cell
    best_score: PlacementScore
    trace: List[RewardTerms] = field(default_factory=list)
    psi_final: float = 0.0
    cells_visited: int = 0
    episode_rewards: List[float] = field(default_factory=list)
    # distinct cells seen so far in the session, at the end of each episode
    episode_cells: List[int] = field(default_factory=list)

    @property
    def session_reward(self) -> float:
        return float(sum(t.r for t in self.trace))


def run_session(
    q: QTable,
    scenario: Scenario,
    state: NetworkState,
    params: LearnParams,
    rng: np.random.Generator,
    objective: Optional[PlacementObjective] = None,
    start: Optional[Cell] = None,
) -> SessionOutcome:
    """Learn on a frozen user snapshot, then extract a placement.

    Every episode restarts at the aerial-BS's current cell. Each step selects an
    action, moves, re-associates users, scores the shaped reward and updates Q.
    The temperature restarts at psi0 and decays by lambda after every step.
    The placement is ranked by feasible fairness, like the exhaustive search.
    """
    if params.episodes < 1 or params.steps_per_episode < 1:
        raise ConfigurationError("a session needs at least one episode of one step", field="episodes")
    if scenario.mode != "aerial":
        raise StateError("learning requires an aerial-mode scenario")

    objective = objective or PlacementObjective(scenario, state.positions)
    lattice = q.lattice
    if objective.lattice != lattice:
        raise QTableIncompatibleError("Q-table lattice does not match the scenario lattice")
    delta1 = scenario.config.delta1
    if start is None:
        start = state.aerial_cell if state.aerial_cell is not None else initial_cell(scenario, lattice)

    psi = params.psi0
    trace: List[RewardTerms] = []
    episode_rewards: List[float] = []
    episode_cells: List[int] = []
    visited = {start}
    incumbent = objective.rank(start)
    for _ in range(params.episodes):
        s = start
        prev = objective.evaluate_cell(s).terms
        total = 0.0
        for _ in range(params.steps_per_episode):
            if params.policy == "metropolis":
                a = select_action_metropolis(q, s, psi, rng)
            else:
                a = select_action_epsilon(q, s, params.epsilon, rng)
            s_next = apply_action(lattice, s, a)
            current = objective.evaluate_cell(s_next).terms
            terms = reward_from_terms(prev, current, delta1)
            alpha = params.learning_rate(q.visits(s, a))
            q_update(q, s, a, terms.r, s_next, alpha, params.eta, params.update_form)
            trace.append(terms)
            total += terms.r
            visited.add(s_next)
            incumbent = min(incumbent, objective.rank(s_next))
            prev = current
            s = s_next
            psi = max(psi * params.lambda_, PSI_FLOOR)
        episode_rewards.append(total)
        episode_cells.append(len(visited))

    best_cell, best_score = extract_placement(
        q, objective, start, rng, restarts=params.climb_restarts, incumbent=incumbent[2]
    )
    outcome = SessionOutcome(
        q=q,
        best_cell=best_cell,
        best_score=best_score,
        trace=trace,
        psi_final=psi,
        cells_visited=len(visited),
        episode_rewards=episode_rewards,
        episode_cells=episode_cells,
    )
    logger.debug(
        "session_learned",
        policy=params.policy,
        start=start,
        best_cell=best_cell,
        theta=best_score.terms.theta,
        session_reward=outcome.session_reward,
        cells_visited=outcome.cells_visited,
    )
    return outcome


class QPlacer:
    """Keeps one Q-table across sessions and places the aerial-BS each session"""

    def __init__(self, scenario: Scenario, policy: Optional[str] = None, table: Optional[QTable] = None):
        self.params = LearnParams.from_config(scenario.config, policy=policy)
        lattice = Lattice.from_config(scenario.config)
        if table is not None and table.lattice != lattice:
            raise QTableIncompatibleError("Q-table lattice does not match the scenario lattice")
        self.table = table if table is not None else QTable(lattice)
        self.last: Optional[SessionOutcome] = None

    def place(
        self,
        scenario: Scenario,
        state: NetworkState,
        rng: np.random.Generator,
        objective: Optional[PlacementObjective] = None,
    ) -> SessionOutcome:
        self.last = run_session(self.table, scenario, state, self.params, rng, objective=objective)
        return self.last


# --- persistence -----------------------------------------------------------


def _lattice_line(lattice: Lattice) -> str:
    return "lattice {} {} {} {} {} {} {}".format(
        repr(float(lattice.x_min)),
        repr(float(lattice.y_min)),
        repr(float(lattice.h_min)),
        repr(float(lattice.upsilon)),
        lattice.nx,
        lattice.ny,
        lattice.nz,
    )


def dumps_qtable(q: QTable) -> str:
    lines = [QTABLE_SCHEMA, _lattice_line(q.lattice)]
    for (ix, iy, iz), action, value, visits in q.rows():
        lines.append(f"{ix},{iy},{iz},{action.label},{value!r},{visits}")
    return "\n".join(lines) + "\n"


def save_qtable(q: QTable, path: PathLike) -> Path:
    """Write the table; identical tables produce identical files"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps_qtable(q), encoding="utf-8")
    logger.info("qtable_saved", path=str(target), rows=len(q))
    return target


def _parse_lattice(line: str, line_no: int) -> Lattice:
    parts = line.split()
    if len(parts) != 8 or parts[0] != "lattice":
        raise QTableParseError("expected 'lattice <x_min> <y_min> <h_min> <upsilon> <nx> <ny> <nz>'", line_no)
    try:
        return Lattice(
            x_min=float(parts[1]),
            y_min=float(parts[2]),
            h_min=float(parts[3]),
            upsilon=float(parts[4]),
            nx=int(parts[5]),
            ny=int(parts[6]),
            nz=int(parts[7]),
        )
    except ValueError as e:
        raise QTableParseError(f"bad lattice metadata: {e}", line_no) from None


def loads_qtable(text: str, lattice: Optional[Lattice] = None) -> QTable:
    """Parse a table; with `lattice`, refuse a table built for another lattice"""
    lines = text.splitlines()
    if not lines:
        raise QTableParseError("empty file", 1)
    header = lines[0].strip()
    if header != QTABLE_SCHEMA:
        if header.startswith("QTABLE "):
            raise QTableIncompatibleError(f"unsupported schema {header!r}, expected {QTABLE_SCHEMA!r}")
        raise QTableParseError(f"expected header {QTABLE_SCHEMA!r}", 1)
    if len(lines) < 2:
        raise QTableParseError("missing lattice line", 2)
    stored = _parse_lattice(lines[1].strip(), 2)
    if lattice is not None and stored != lattice:
        raise QTableIncompatibleError(
            f"table lattice {stored.dims} pitch {stored.upsilon} "
            f"does not match active lattice {lattice.dims} pitch {lattice.upsilon}"
        )

    q = QTable(stored)
    for line_no, raw in enumerate(lines[2:], start=3):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 6:
            raise QTableParseError(f"expected 6 fields, got {len(fields)}", line_no)
        try:
            cell = (int(fields[0]), int(fields[1]), int(fields[2]))
            action = Action.from_label(fields[3])
            value = float(fields[4])
            visits = int(fields[5])
        except ValueError as e:
            raise QTableParseError(str(e), line_no) from None
        if not stored.contains(cell):
            raise QTableParseError(f"cell {cell} outside the lattice", line_no)
        if not math.isfinite(value) or visits < 0:
            raise QTableParseError("value must be finite and visits non-negative", line_no)
        if (cell, int(action)) in q._values:
            raise QTableParseError(f"duplicate row for {cell} {action.label}", line_no)
        q.set(cell, action, value, visits=visits)
    return q


def load_qtable(path: PathLike, lattice: Optional[Lattice] = None) -> QTable:
    source = Path(path)
    q = loads_qtable(source.read_text(encoding="utf-8"), lattice=lattice)
    logger.info("qtable_loaded", path=str(source), rows=len(q))
    return q


@dataclass
class QTableSummary:
    header: str
    lattice: Lattice
    rows: int


def inspect_qtable(path: PathLike) -> QTableSummary:
    q = loads_qtable(Path(path).read_text(encoding="utf-8"))
    return QTableSummary(header=QTABLE_SCHEMA, lattice=q.lattice, rows=len(q))
