import csv
import hashlib
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import structlog
from pydantic import ValidationError

from skyfair.core.config import settings, setup_output_directory
from skyfair.core.errors import ConfigurationError
from skyfair.models.metrics import MetricsLog, RunManifest
from skyfair.models.scenario import Point2D, Scenario

logger = structlog.get_logger(__name__)

TIMESERIES_FILE = "fairness_timeseries.csv"
SINR_CDF_FILE = "sinr_cdf.csv"
POSITIONS_FILE = "positions.csv"
TRAJECTORY_FILE = "trajectory.csv"
CONVERGENCE_FILE = "convergence.csv"
MANIFEST_FILE = "manifest.json"

TIMESERIES_HEADER = ("t_s", "arm", "theta", "omega", "beta", "jain")
SINR_CDF_HEADER = ("arm", "user_id", "avg_sinr_db")
POSITIONS_HEADER = ("kind", "id", "x_m", "y_m", "h_m")
TRAJECTORY_HEADER = ("t_s", "user_id", "x_m", "y_m")
CONVERGENCE_HEADER = ("t_s", "arm", "episode", "episode_reward", "cells_visited")


def fmt(value: float) -> str:
    """Shortest round-trip decimal representation"""
    return repr(float(value))


def file_digest(path: Path) -> str:
    """Hex sha256 of a written artifact"""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class FileHandler:
    """Reads and writes run artifacts under one output directory"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR)

    def prepare(self) -> Path:
        return setup_output_directory(str(self.output_dir))

    def _write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
        path = self.prepare() / name
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        logger.info("artifact_written", path=str(path))
        return path

    def write_timeseries(self, log: MetricsLog) -> Path:
        rows = (
            (fmt(r.t_s), r.arm, fmt(r.theta), fmt(r.omega), fmt(r.beta), fmt(r.jain))
            for r in log.rows
        )
        return self._write_rows(TIMESERIES_FILE, TIMESERIES_HEADER, rows)

    def write_convergence(self, log: MetricsLog) -> Path:
        """Per-episode reward of every learning session"""
        rows = (
            (fmt(c.t_s), c.arm, str(c.episode), fmt(c.episode_reward), str(c.cells_visited))
            for c in log.convergence
        )
        return self._write_rows(CONVERGENCE_FILE, CONVERGENCE_HEADER, rows)

    def write_sinr_cdf(self, log: MetricsLog) -> Path:
        rows: List[Tuple[str, str, str]] = []
        for arm in log.arms:
            for user_id, value in enumerate(log.average_sinr_db(arm)):
                rows.append((arm, str(user_id), fmt(value)))
        return self._write_rows(SINR_CDF_FILE, SINR_CDF_HEADER, rows)

    def write_positions(
        self,
        scenario: Scenario,
        users: Sequence[Point2D],
        aerial: Dict[str, Optional[Tuple[float, float, float]]],
    ) -> Path:
        """Snapshot of every node; aerial rows carry the arm name as id"""
        rows: List[Tuple[str, ...]] = []
        for bs in scenario.ground_bss:
            kind = "anchor" if bs.is_backhaul_anchor else "ground_bs"
            rows.append((kind, str(bs.id), fmt(bs.position[0]), fmt(bs.position[1]), fmt(bs.height_m)))
        for k, (x, y) in enumerate(scenario.attractors):
            rows.append(("attractor", str(k), fmt(x), fmt(y), fmt(0.0)))
        for i, (x, y) in enumerate(users):
            rows.append(("user", str(i), fmt(x), fmt(y), fmt(0.0)))
        for arm, position in aerial.items():
            if position is not None:
                rows.append(("aerial", arm, fmt(position[0]), fmt(position[1]), fmt(position[2])))
        return self._write_rows(POSITIONS_FILE, POSITIONS_HEADER, rows)

    def write_trajectory(self, rows: Iterable[Tuple[float, int, float, float]]) -> Path:
        formatted = ((fmt(t), str(user), fmt(x), fmt(y)) for t, user, x, y in rows)
        return self._write_rows(TRAJECTORY_FILE, TRAJECTORY_HEADER, formatted)

    def write_manifest(self, manifest: RunManifest, path: Optional[str] = None) -> Path:
        target = Path(path) if path else self.prepare() / MANIFEST_FILE
        target.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("artifact_written", path=str(target))
        return target

    @staticmethod
    def read_manifest(path: str) -> RunManifest:
        text = Path(path).read_text(encoding="utf-8")
        try:
            return RunManifest.model_validate_json(text)
        except ValidationError as e:
            raise ConfigurationError(f"{path}: {e.errors()[0]['msg']}", field="manifest") from None

    @staticmethod
    def read_snapshot(path: str) -> List[Point2D]:
        """User positions from a positions.csv dump, ordered by user id"""
        users: Dict[int, Point2D] = {}
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or tuple(reader.fieldnames) != POSITIONS_HEADER:
                raise ConfigurationError(f"{path}: expected header {','.join(POSITIONS_HEADER)}", field="snapshot")
            for line_no, row in enumerate(reader, start=2):
                if row["kind"] != "user":
                    continue
                try:
                    users[int(row["id"])] = (float(row["x_m"]), float(row["y_m"]))
                except (TypeError, ValueError):
                    raise ConfigurationError(f"{path}:{line_no}: malformed user row", field="snapshot") from None
        if sorted(users) != list(range(len(users))):
            raise ConfigurationError(f"{path}: user ids must run 0..n-1", field="snapshot")
        return [users[i] for i in range(len(users))]


def get_file_handler(output_dir: Optional[str] = None) -> FileHandler:
    """Handler rooted at output_dir (defaults to SKYFAIR_OUTPUT_DIR)"""
    return FileHandler(output_dir)
