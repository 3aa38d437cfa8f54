"""
Max-SINR user association.

The bandwidth share b scales signal, interference and noise alike, so a
user's SINR towards a BS does not depend on that BS's load and a single
pass over the SINR matrix settles the association. Under full reuse the
max-SINR server is also the max-received-power server.
"""
from typing import Optional

import numpy as np

from skyfair.core.errors import ConfigurationError, StateError
from skyfair.models.network import AssociationMatrix
from skyfair.models.scenario import Scenario
from skyfair.services.channel import (
    noise_density_linear,
    path_loss_matrix,
    serving_stations,
    sinr_matrix,
)
from skyfair.utils.units import db_to_linear


def best_server_columns(rx_density: np.ndarray, noise_density: float) -> np.ndarray:
    """Column of the max-SINR station per user; ties go to the lowest column (lowest id)"""
    return np.argmax(sinr_matrix(rx_density, noise_density), axis=1)


def associate_max_sinr(
    scenario: Scenario,
    positions: np.ndarray,
    aerial_pos: Optional[np.ndarray] = None,
) -> AssociationMatrix:
    """Assign every user to exactly one serving BS"""
    try:
        stations = serving_stations(scenario, aerial_pos)
    except StateError as e:
        raise ConfigurationError(str(e), field="j") from e
    users = np.asarray(positions, dtype=float).reshape(-1, 2)
    loss = path_loss_matrix(scenario, users, stations)
    rx_density = db_to_linear(stations.psd_dbm_hz[None, :] - loss)
    cols = best_server_columns(rx_density, noise_density_linear(scenario.config))
    return AssociationMatrix.from_array(stations.ids[cols])
