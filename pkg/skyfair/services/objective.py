"""
Placement objective: proportional fairness, SINR bonus, backhaul penalty,
constraint checks and the shaped reward shared by every optimizer.
"""
import math
from dataclasses import dataclass
from typing import Collection, Dict, Iterable, Optional, Tuple

import numpy as np

from skyfair.core.errors import StateError
from skyfair.models.learning import CandidateEvaluation, ConstraintReport, Lattice, RewardTerms
from skyfair.models.network import Cell
from skyfair.models.scenario import Scenario, ScenarioConfig
from skyfair.services.association import best_server_columns
from skyfair.services.channel import (
    A2GChannelParams,
    LinkTable,
    StationSet,
    aerial_loss_column,
    as_link_table,
    link_table_from_losses,
    noise_density_linear,
    path_loss_matrix,
    serving_stations,
)
from skyfair.utils.units import db_to_linear, linear_to_db

# Reward used when a served user gets zero rate (fairness is -inf)
REWARD_FLOOR = -1e6


def heaviside(x: float) -> float:
    """Strict step: H[0] = 0"""
    return 1.0 if x > 0 else 0.0


def proportional_fairness(links) -> float:
    """Sum of natural-log rates over served users; -inf if any served rate is not positive"""
    rates = as_link_table(links).rate_bps
    if rates.size == 0:
        return 0.0
    if np.any(rates <= 0):
        return float("-inf")
    return float(np.sum(np.log(rates)))


def _aerial_mask(table: LinkTable, aerial_users: Collection[int]) -> np.ndarray:
    mask = np.zeros(len(table), dtype=bool)
    idx = np.asarray(aerial_users if isinstance(aerial_users, np.ndarray) else list(aerial_users), dtype=np.int64)
    if idx.size:
        mask[idx] = True
    return mask


def constraint_report(links, aerial_users: Collection[int], config: ScenarioConfig) -> ConstraintReport:
    """Backhaul, minimum-rate and aerial power constraints of one placement"""
    table = as_link_table(links)
    load = float(table.rate_bps[_aerial_mask(table, aerial_users)].sum())
    min_rate = float(table.rate_bps.min()) if len(table) else None
    return ConstraintReport(
        backhaul_load_bps=load,
        backhaul_cap_bps=config.c_zeta_bps,
        backhaul_ok=load <= config.c_zeta_bps,
        min_rate_bps=min_rate,
        r_min_bps=config.r_min_bps,
        rate_ok=min_rate is None or min_rate >= config.r_min_bps,
        # a flat PSD of P_max/BW over the band radiates exactly P_max
        aerial_power_dbm=config.p_max_dbm,
        p_max_dbm=config.p_max_dbm,
        power_ok=True,
        power_margin_db=0.0,
    )


def measure_terms(links, aerial_users: Collection[int], config: ScenarioConfig) -> RewardTerms:
    """Theta, omega and beta of one iteration (reward fields left at zero)"""
    table = as_link_table(links)
    satisfied = table.rate_bps - config.r_min_bps > 0
    omega = float(table.sinr[satisfied].sum())
    load = float(table.rate_bps[_aerial_mask(table, aerial_users)].sum())
    beta = config.eta1 * heaviside(load - config.c_zeta_bps)
    return RewardTerms(theta=proportional_fairness(table), omega=omega, beta=beta)


def reward_from_terms(prev: RewardTerms, current: RewardTerms, delta1: float) -> RewardTerms:
    """r = r+ - r-, with r+ = dTheta + dOmega and r- = delta1 * dBeta"""
    if current.theta == float("-inf"):
        return current.model_copy(update={"r_plus": REWARD_FLOOR, "r_minus": 0.0, "r": REWARD_FLOOR})
    if prev.theta == float("-inf"):
        d_theta = -REWARD_FLOOR
    else:
        d_theta = current.theta - prev.theta
    r_plus = d_theta + (current.omega - prev.omega)
    r_minus = delta1 * (current.beta - prev.beta)
    return current.model_copy(update={"r_plus": r_plus, "r_minus": r_minus, "r": r_plus - r_minus})


def reward(prev: RewardTerms, links, aerial_users: Collection[int], config: ScenarioConfig) -> RewardTerms:
    """Shaped reward of iteration t given the terms of iteration t-1"""
    return reward_from_terms(prev, measure_terms(links, aerial_users, config), config.delta1)


@dataclass
class PlacementScore:
    """Links and objective terms of one aerial placement (or none)"""
    aerial_pos: Optional[Tuple[float, float, float]]
    links: LinkTable
    terms: RewardTerms
    report: ConstraintReport
    aerial_users: np.ndarray

    def potential(self, delta1: float) -> float:
        return self.terms.potential(delta1)

    @property
    def feasible(self) -> bool:
        return self.report.feasible


# (infeasible, -theta, cell): the smallest key wins
RankKey = Tuple[bool, float, Cell]


def fairness_key(score: PlacementScore, cell: Cell) -> RankKey:
    """Feasible placements first, then higher fairness, then the smaller cell"""
    return (not score.feasible, -score.terms.theta, cell)


class PlacementObjective:
    """Scores aerial placements for a frozen user snapshot.

    Ground losses are computed once; each candidate only adds the aerial
    column. Scores are cached per position, so revisiting a lattice cell is free.
    """

    def __init__(self, scenario: Scenario, positions: np.ndarray):
        self.scenario = scenario
        self.config = scenario.config
        self.users = np.asarray(positions, dtype=float).reshape(-1, 2)
        self.lattice = Lattice.from_config(self.config)
        self._params = A2GChannelParams.from_config(self.config)
        self._noise = noise_density_linear(self.config)
        self._ground = serving_stations(scenario, None) if scenario.serving_ground else None
        self._ground_loss = (
            path_loss_matrix(scenario, self.users, self._ground) if self._ground is not None else None
        )
        self._aerial_psd = self.config.p_max_dbm - float(linear_to_db(self.config.bw_hz))
        self._cache: Dict[Optional[Tuple[float, float, float]], PlacementScore] = {}

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def _stations(self, aerial: Optional[np.ndarray]) -> Tuple[StationSet, np.ndarray]:
        if aerial is None or self.scenario.mode != "aerial":
            if self._ground is None:
                raise StateError("no serving base station")
            return self._ground, self._ground_loss
        column = aerial_loss_column(self._params, self.users, aerial)[:, None]
        if self._ground is None:
            ids = np.array([self.scenario.aerial_bs_id], dtype=np.int64)
            positions = aerial[None, :]
            psd = np.array([self._aerial_psd])
            loss = column
        else:
            ids = np.append(self._ground.ids, self.scenario.aerial_bs_id)
            positions = np.vstack([self._ground.positions, aerial[None, :]])
            psd = np.append(self._ground.psd_dbm_hz, self._aerial_psd)
            loss = np.hstack([self._ground_loss, column])
        stations = StationSet(ids=ids, positions=positions, psd_dbm_hz=psd, aerial_column=len(ids) - 1)
        return stations, loss

    def evaluate(self, aerial_pos=None, cache: bool = True) -> PlacementScore:
        """Associate by max SINR, then score; aerial_pos None means no aerial-BS"""
        aerial = None if aerial_pos is None else np.asarray(aerial_pos, dtype=float)
        key = None if aerial is None else (float(aerial[0]), float(aerial[1]), float(aerial[2]))
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        stations, loss = self._stations(aerial)
        rx_density = db_to_linear(stations.psd_dbm_hz[None, :] - loss)
        cols = best_server_columns(rx_density, self._noise)
        links = link_table_from_losses(self.config, stations, loss, cols)
        if stations.aerial_column is not None:
            aerial_users = np.flatnonzero(cols == stations.aerial_column)
        else:
            aerial_users = np.empty(0, dtype=np.int64)
        score = PlacementScore(
            aerial_pos=key,
            links=links,
            terms=measure_terms(links, aerial_users, self.config),
            report=constraint_report(links, aerial_users, self.config),
            aerial_users=aerial_users,
        )
        if cache:
            self._cache[key] = score
        return score

    def evaluate_cell(self, cell: Cell) -> PlacementScore:
        return self.evaluate(self.lattice.center(cell))

    def rank(self, cell: Cell) -> RankKey:
        return fairness_key(self.evaluate_cell(cell), cell)

    def best_cell(self, cells: Iterable[Cell]) -> Tuple[Cell, PlacementScore]:
        """Best-ranked cell of a non-empty collection"""
        _, _, cell = min(self.rank(c) for c in cells)
        return cell, self.evaluate_cell(cell)

    def candidate(self, method: str, score: PlacementScore, fitness: Optional[float] = None) -> CandidateEvaluation:
        """Wrap a score as a CandidateEvaluation"""
        cell = self.lattice.cell_of(score.aerial_pos) if score.aerial_pos is not None else None
        position = score.aerial_pos if score.aerial_pos is not None else (math.nan, math.nan, math.nan)
        return CandidateEvaluation(
            method=method,
            cell=cell,
            position=position,
            theta=score.terms.theta,
            omega=score.terms.omega,
            beta=score.terms.beta,
            fitness=score.terms.theta if fitness is None else fitness,
            feasible=score.feasible,
            backhaul_margin_bps=score.report.backhaul_margin_bps,
            rate_margin_bps=score.report.rate_margin_bps,
            power_margin_db=score.report.power_margin_db,
        )
