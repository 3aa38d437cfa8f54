"""
Radio math: free-space and excess path loss, LoS probability, terrestrial
path loss, link budgets, SINR and Shannon rates.

Scalar operations accept numpy arrays as well and broadcast. Network-level
helpers clamp link distances to MIN_LINK_DISTANCE_M so that a user standing
on a mast still gets a finite loss.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from skyfair.core.errors import DomainError, StateError
from skyfair.models.learning import Lattice
from skyfair.models.network import LinkReport, NetworkState
from skyfair.models.scenario import Scenario, ScenarioConfig
from skyfair.utils.units import as_scalar_or_array, db_to_linear, linear_to_db

SPEED_OF_LIGHT = 299_792_458.0
MIN_LINK_DISTANCE_M = 1.0


class A2GChannelParams(BaseModel):
    """Air-to-ground model constants"""
    model_config = ConfigDict(frozen=True)

    f_hz: float = Field(default=2e9, gt=0)
    c: float = SPEED_OF_LIGHT
    eta_los_db: float = Field(default=1.0, ge=0)
    eta_nlos_db: float = Field(default=20.0, ge=0)
    a: float = Field(default=9.61, gt=0)
    b: float = Field(default=0.16, gt=0)

    @model_validator(mode="after")
    def _check_order(self) -> "A2GChannelParams":
        if self.eta_nlos_db < self.eta_los_db:
            raise DomainError("eta_nlos_db must be >= eta_los_db")
        return self

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "A2GChannelParams":
        return cls(
            f_hz=config.f_hz,
            eta_los_db=config.eta_los_db,
            eta_nlos_db=config.eta_nlos_db,
            a=config.los_a,
            b=config.los_b,
        )


def free_space_path_loss(d, f):
    """20log10(d) + 20log10(f) + 20log10(4*pi/c), in dB"""
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    if np.any(f <= 0):
        raise DomainError("frequency must be positive")
    loss = 20.0 * np.log10(d) + 20.0 * np.log10(f) + 20.0 * np.log10(4.0 * np.pi / SPEED_OF_LIGHT)
    return as_scalar_or_array(loss)


def los_probability(elevation_deg, params: A2GChannelParams):
    """Sigmoid 1 / (1 + a*exp(-b*(theta - a))) over the elevation angle in degrees"""
    theta = np.asarray(elevation_deg, dtype=float)
    if np.any(theta < 0) or np.any(theta > 90) or np.any(np.isnan(theta)):
        raise DomainError("elevation angle must lie in [0, 90] degrees")
    prob = 1.0 / (1.0 + params.a * np.exp(-params.b * (theta - params.a)))
    return as_scalar_or_array(prob)


def _elevation_deg(height, distance):
    return np.degrees(np.arcsin(np.clip(height / distance, -1.0, 1.0)))


def _a2g_loss(params: A2GChannelParams, height, d):
    p_los = np.asarray(los_probability(_elevation_deg(height, d), params))
    excess = p_los * params.eta_los_db + (1.0 - p_los) * params.eta_nlos_db
    return np.asarray(free_space_path_loss(d, params.f_hz)) + excess


def a2g_path_loss(aerial_pos, user_pos, params: A2GChannelParams):
    """LoS/NLoS-averaged air-to-ground loss; user_pos may be one point or an (N, 2) array"""
    aerial = np.asarray(aerial_pos, dtype=float)
    users = np.asarray(user_pos, dtype=float)
    ground = np.hypot(users[..., 0] - aerial[0], users[..., 1] - aerial[1])
    d = np.sqrt(ground ** 2 + aerial[2] ** 2)
    if np.any(d <= 0):
        raise DomainError("aerial-BS and user coincide")
    return as_scalar_or_array(_a2g_loss(params, aerial[2], d))


def ground_path_loss(bs_pos, user_pos, intercept_db: float = 128.1, slope_db: float = 37.6):
    """Log-distance urban-macro loss, PL = intercept + slope*log10(d_km).

    A 3-component bs_pos (x, y, height) uses the 3D distance, otherwise 2D.
    """
    bs = np.asarray(bs_pos, dtype=float)
    users = np.asarray(user_pos, dtype=float)
    d = np.hypot(users[..., 0] - bs[0], users[..., 1] - bs[1])
    if bs.shape[-1] == 3:
        d = np.sqrt(d ** 2 + bs[2] ** 2)
    if np.any(d <= 0):
        raise DomainError("ground-BS and user coincide")
    return as_scalar_or_array(intercept_db + slope_db * np.log10(d / 1000.0))


def link_budget_dbm(psd_dbm_hz, bandwidth_hz, path_loss_db):
    """Received power over a bandwidth share from a flat transmit PSD"""
    return as_scalar_or_array(
        np.asarray(psd_dbm_hz) + linear_to_db(bandwidth_hz) - np.asarray(path_loss_db)
    )


def noise_power_dbm(noise_psd_dbm_hz: float, bandwidth_hz, noise_figure_db: float):
    return as_scalar_or_array(noise_psd_dbm_hz + linear_to_db(bandwidth_hz) + noise_figure_db)


def sinr(signal_dbm, interference_dbm: Sequence[float], noise_dbm):
    """Linear SINR from dB-domain signal, interferers and noise"""
    interference = np.sum(db_to_linear(np.asarray(interference_dbm, dtype=float)))
    return float(db_to_linear(signal_dbm) / (db_to_linear(noise_dbm) + interference))


def shannon_rate(bandwidth_hz, sinr_linear):
    """R = b*log2(1 + gamma)"""
    gamma = np.asarray(sinr_linear, dtype=float)
    if np.any(gamma < 0):
        raise DomainError("SINR must be non-negative")
    return as_scalar_or_array(np.asarray(bandwidth_hz, dtype=float) * np.log2(1.0 + gamma))


@dataclass
class StationSet:
    """BSs that radiate and may serve users, in id order (aerial last)"""
    ids: np.ndarray
    positions: np.ndarray  # (K, 3); ground heights per config, aerial at flight height
    psd_dbm_hz: np.ndarray
    aerial_column: Optional[int] = None

    @property
    def size(self) -> int:
        return int(self.ids.shape[0])

    def column_of(self, bs_ids: np.ndarray) -> np.ndarray:
        lookup = {int(bs): col for col, bs in enumerate(self.ids)}
        try:
            return np.array([lookup[int(bs)] for bs in bs_ids], dtype=np.int64)
        except KeyError as e:
            raise StateError(f"BS {e.args[0]} is not a serving station") from None


def serving_stations(scenario: Scenario, aerial_pos=None) -> StationSet:
    """Serving ground-BSs (never the backhaul anchor) plus the aerial-BS when placed"""
    config = scenario.config
    ground = scenario.serving_ground
    ids = [bs.id for bs in ground]
    positions = [(bs.position[0], bs.position[1], bs.height_m) for bs in ground]
    psd = [bs.tx_power_dbm - float(linear_to_db(config.bw_hz)) for bs in ground]
    aerial_column = None
    if scenario.mode == "aerial" and aerial_pos is not None:
        aerial_column = len(ids)
        ids.append(scenario.aerial_bs_id)
        positions.append(tuple(float(v) for v in aerial_pos))
        psd.append(config.p_max_dbm - float(linear_to_db(config.bw_hz)))
    if not ids:
        raise StateError("no serving base station")
    return StationSet(
        ids=np.asarray(ids, dtype=np.int64),
        positions=np.asarray(positions, dtype=float).reshape(-1, 3),
        psd_dbm_hz=np.asarray(psd, dtype=float),
        aerial_column=aerial_column,
    )


def ground_loss_matrix(config: ScenarioConfig, users: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """(N, K) terrestrial losses with distances clamped to MIN_LINK_DISTANCE_M"""
    d = np.hypot(users[:, None, 0] - positions[None, :, 0], users[:, None, 1] - positions[None, :, 1])
    if config.ground_height_in_distance:
        d = np.sqrt(d ** 2 + positions[None, :, 2] ** 2)
    d = np.maximum(d, MIN_LINK_DISTANCE_M)
    return config.ground_pl_intercept_db + config.ground_pl_slope_db * np.log10(d / 1000.0)


def aerial_loss_column(params: A2GChannelParams, users: np.ndarray, aerial_pos) -> np.ndarray:
    """(N,) air-to-ground losses with the 3D distance clamped to MIN_LINK_DISTANCE_M"""
    aerial = np.asarray(aerial_pos, dtype=float)
    ground = np.hypot(users[:, 0] - aerial[0], users[:, 1] - aerial[1])
    d = np.maximum(np.sqrt(ground ** 2 + aerial[2] ** 2), MIN_LINK_DISTANCE_M)
    return _a2g_loss(params, aerial[2], d)


def path_loss_matrix(scenario: Scenario, users: np.ndarray, stations: StationSet) -> np.ndarray:
    config = scenario.config
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    loss = ground_loss_matrix(config, users, stations.positions)
    if stations.aerial_column is not None:
        params = A2GChannelParams.from_config(config)
        loss[:, stations.aerial_column] = aerial_loss_column(
            params, users, stations.positions[stations.aerial_column]
        )
    return loss


def noise_density_linear(config: ScenarioConfig) -> float:
    """Noise per Hz including the receiver noise figure, in mW/Hz"""
    return float(db_to_linear(config.noise_psd_dbm_hz + config.noise_figure_db))


def sinr_matrix(rx_density: np.ndarray, noise_density: float) -> np.ndarray:
    """(N, K) SINR of every user towards every station, all others interfering.

    rx_density holds received power per Hz (linear). Bandwidth shares cancel
    because signal, interference and noise all scale with the same b.
    """
    total = rx_density.sum(axis=1, keepdims=True)
    return rx_density / (noise_density + (total - rx_density))


@dataclass
class LinkTable:
    """Column-oriented LinkReports, indexed by user id"""
    serving_bs: np.ndarray
    path_loss_db: np.ndarray
    rx_power_dbm: np.ndarray
    sinr: np.ndarray
    rate_bps: np.ndarray
    bandwidth_hz: np.ndarray

    def __len__(self) -> int:
        return int(self.serving_bs.shape[0])

    @property
    def sinr_db(self) -> np.ndarray:
        return linear_to_db(self.sinr)

    def users_of(self, bs_id: int) -> np.ndarray:
        return np.flatnonzero(self.serving_bs == bs_id)

    def reports(self) -> List[LinkReport]:
        return [
            LinkReport(
                user_id=i,
                serving_bs_id=int(self.serving_bs[i]),
                path_loss_db=float(self.path_loss_db[i]),
                rx_power_dbm=float(self.rx_power_dbm[i]),
                sinr=float(self.sinr[i]),
                rate_bps=float(self.rate_bps[i]),
                bandwidth_hz=float(self.bandwidth_hz[i]),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_reports(cls, reports: Sequence[LinkReport]) -> "LinkTable":
        ordered = sorted(reports, key=lambda rep: rep.user_id)
        return cls(
            serving_bs=np.array([r.serving_bs_id for r in ordered], dtype=np.int64),
            path_loss_db=np.array([r.path_loss_db for r in ordered], dtype=float),
            rx_power_dbm=np.array([r.rx_power_dbm for r in ordered], dtype=float),
            sinr=np.array([r.sinr for r in ordered], dtype=float),
            rate_bps=np.array([r.rate_bps for r in ordered], dtype=float),
            bandwidth_hz=np.array([r.bandwidth_hz for r in ordered], dtype=float),
        )


def as_link_table(links) -> LinkTable:
    return links if isinstance(links, LinkTable) else LinkTable.from_reports(list(links))


def link_table_from_losses(
    config: ScenarioConfig,
    stations: StationSet,
    loss: np.ndarray,
    serving_cols: np.ndarray,
) -> LinkTable:
    """Equal bandwidth split per BS, full reuse between BSs, per-user links"""
    n = loss.shape[0]
    rows = np.arange(n)
    load = np.bincount(serving_cols, minlength=stations.size)
    share = config.bw_hz / load[serving_cols]
    share_db = linear_to_db(share)

    rx_dbm = link_budget_dbm(stations.psd_dbm_hz[None, :], share[:, None], loss)
    rx = db_to_linear(rx_dbm)
    signal = rx[rows, serving_cols]
    others = np.ones_like(rx, dtype=bool)
    others[rows, serving_cols] = False
    interference = np.where(others, rx, 0.0).sum(axis=1)
    noise = db_to_linear(config.noise_psd_dbm_hz + share_db + config.noise_figure_db)
    gamma = signal / (noise + interference)
    return LinkTable(
        serving_bs=stations.ids[serving_cols],
        path_loss_db=loss[rows, serving_cols],
        rx_power_dbm=rx_dbm[rows, serving_cols],
        sinr=gamma,
        rate_bps=share * np.log2(1.0 + gamma),
        bandwidth_hz=share,
    )


def aerial_position(scenario: Scenario, state: NetworkState) -> Optional[np.ndarray]:
    if scenario.mode != "aerial" or state.aerial_cell is None:
        return None
    return Lattice.from_config(scenario.config).center(state.aerial_cell)


def compute_links(scenario: Scenario, state: NetworkState) -> List[LinkReport]:
    """Per-user link reports for the state's association and aerial placement"""
    if state.association is None:
        raise StateError("users are not associated")
    serving = state.association.as_array(state.num_users)
    if np.any(serving < 0):
        raise StateError(f"user {int(np.flatnonzero(serving < 0)[0])} has no serving BS")
    stations = serving_stations(scenario, aerial_position(scenario, state))
    loss = path_loss_matrix(scenario, state.positions, stations)
    table = link_table_from_losses(scenario.config, stations, loss, stations.column_of(serving))
    return table.reports()
