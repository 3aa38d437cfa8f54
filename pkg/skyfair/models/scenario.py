from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from skyfair.core.errors import ConfigurationError

Point2D = Tuple[float, float]

ARMS: Tuple[str, ...] = ("traditional", "saq", "egreedy", "pso", "exhaustive")
AERIAL_ARMS: Tuple[str, ...] = ("saq", "egreedy", "pso", "exhaustive")
PLACE_METHODS: Tuple[str, ...] = ("exhaustive", "pso", "saq", "egreedy", "all")


def _divides(extent: float, pitch: float) -> bool:
    ratio = extent / pitch
    return abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1


class Region(BaseModel):
    """Rectangular footprint plus the aerial flight-height band"""
    model_config = ConfigDict(frozen=True)

    x_min: float = Field(description="Western edge in meters")
    x_max: float = Field(description="Eastern edge in meters")
    y_min: float = Field(description="Southern edge in meters")
    y_max: float = Field(description="Northern edge in meters")
    h_min: float = Field(description="Lowest aerial flight height in meters")
    h_max: float = Field(description="Highest aerial flight height in meters")

    @model_validator(mode="after")
    def _check_bounds(self) -> "Region":
        if not self.x_min < self.x_max:
            raise ConfigurationError("x_min must be below x_max", field="x_min_m")
        if not self.y_min < self.y_max:
            raise ConfigurationError("y_min must be below y_max", field="y_min_m")
        if not 0 < self.h_min < self.h_max:
            raise ConfigurationError("require 0 < h_min < h_max", field="h_min_m")
        return self

    @property
    def centroid(self) -> Point2D:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


class GroundBS(BaseModel):
    """Fixed terrestrial base station"""
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0, description="Station identifier, also its column in link matrices")
    position: Point2D = Field(description="Ground footprint position in meters")
    tx_power_dbm: float = Field(description="Total transmit power over the band")
    height_m: float = Field(default=25.0, ge=0, description="Antenna height")
    is_backhaul_anchor: bool = Field(
        default=False, description="Serves the aerial backhaul only, never users"
    )


class ScenarioConfig(BaseModel):
    """World, channel and learning constants. Field names double as config-file keys."""
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    # Topology
    j: int = Field(default=18, ge=1, description="Number of ground-BSs")
    m_min: int = Field(default=200, ge=1, description="Lower bound of the user count")
    m_max: int = Field(default=300, ge=1, description="Upper bound of the user count")
    nu: int = Field(default=5, ge=0, description="Number of attraction points")
    x_min_m: float = -2000.0
    x_max_m: float = 2000.0
    y_min_m: float = -2000.0
    y_max_m: float = 2000.0
    h_min_m: float = 25.0
    h_max_m: float = 525.0

    # Radio
    f_hz: float = Field(default=2e9, gt=0, description="Carrier frequency")
    bw_hz: float = Field(default=20e6, gt=0, description="System bandwidth")
    p_max_dbm: float = Field(default=49.0, description="Per-BS transmit power limit")
    r_min_bps: float = Field(default=0.0, ge=0, description="Minimum user rate")
    c_zeta_bps: float = Field(default=100e6, gt=0, description="Aerial backhaul capacity")
    eta_los_db: float = Field(default=1.0, ge=0, description="LoS excess loss")
    eta_nlos_db: float = Field(default=20.0, ge=0, description="NLoS excess loss")
    los_a: float = Field(default=9.61, gt=0, description="LoS sigmoid parameter a")
    los_b: float = Field(default=0.16, gt=0, description="LoS sigmoid parameter b")
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = Field(default=9.0, ge=0)
    ground_bs_height_m: float = Field(default=25.0, ge=0)
    ground_height_in_distance: bool = Field(
        default=False, description="Use 3D distance (antenna height) in the terrestrial model"
    )
    ground_pl_intercept_db: float = 128.1
    ground_pl_slope_db: float = Field(default=37.6, gt=0)

    # Mobility
    t_min_s: float = Field(default=150.0, gt=0, description="Placement session cadence")
    dt_s: float = Field(default=1.0, gt=0, description="Mobility integration tick")
    max_speed_mps: float = Field(default=1.3, gt=0, description="Maximum pedestrian speed")

    # Learning
    upsilon_m: float = Field(default=10.0, gt=0, description="Lattice pitch")
    eta: float = Field(default=0.9, ge=0, lt=1, description="Discount factor")
    psi0: float = Field(default=10.0, gt=0, description="Initial annealing temperature")
    lambda_: float = Field(default=0.99, gt=0, lt=1, alias="lambda", description="Annealing decay")
    eta1: float = Field(default=1000.0, ge=0, description="Backhaul penalty magnitude")
    delta1: float = Field(default=100.0, ge=0, description="Penalty weight in the reward")
    alpha_exponent: float = Field(default=0.85, gt=0, le=1, description="Learning-rate decay exponent")
    episodes: int = Field(default=50, description="Episodes per placement session")
    steps_per_episode: int = Field(default=100, description="Steps per episode")
    policy: Literal["metropolis", "epsilon_greedy"] = "metropolis"
    epsilon: float = Field(default=0.1, ge=0, le=1)
    q_update_form: Literal["standard", "printed"] = "standard"
    climb_restarts: int = Field(
        default=50, ge=0, description="Random starts of the fairness ascent that picks a session placement"
    )

    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_invariants(self) -> "ScenarioConfig":
        if self.m_min > self.m_max:
            raise ConfigurationError("m_min must not exceed m_max", field="m_min")
        if self.eta_nlos_db < self.eta_los_db:
            raise ConfigurationError("NLoS excess loss must be >= LoS excess loss", field="eta_nlos_db")
        region = self.region
        for name, extent in (
            ("x", region.x_max - region.x_min),
            ("y", region.y_max - region.y_min),
            ("h", region.h_max - region.h_min),
        ):
            if not _divides(extent, self.upsilon_m):
                raise ConfigurationError(
                    f"pitch {self.upsilon_m} does not divide the {name} extent {extent}",
                    field="upsilon_m",
                )
        return self

    @property
    def region(self) -> Region:
        return Region(
            x_min=self.x_min_m, x_max=self.x_max_m,
            y_min=self.y_min_m, y_max=self.y_max_m,
            h_min=self.h_min_m, h_max=self.h_max_m,
        )


class ExperimentOptions(BaseModel):
    """Run options that are not part of the simulated world"""
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    arms: List[str] = Field(default_factory=lambda: ["traditional", "saq"])
    duration_s: float = Field(default=1500.0, gt=0)
    stride: Optional[int] = Field(default=None, ge=1, description="Exhaustive-search cell stride")
    i_know_this_is_huge: bool = Field(
        default=False, description="Allow exhaustive searches above the candidate cap"
    )
    pso_swarm: int = Field(default=30, ge=2)
    pso_iters: int = Field(default=100, ge=1)
    pso_inertia: float = 0.72
    pso_cognitive: float = 1.49
    pso_social: float = 1.49
    write_positions: bool = True
    write_trajectory: bool = False

    # Paths and the one-shot method; the matching CLI flags win over a config file
    out_dir: Optional[str] = Field(default=None, description="Artifact directory (defaults to SKYFAIR_OUTPUT_DIR)")
    qtable_in: Optional[str] = Field(default=None, description="Warm-start table for the saq arm")
    qtable_out: Optional[str] = Field(default=None, description="Where to save the saq table")
    snapshot: Optional[str] = Field(default=None, description="positions.csv whose users replace the generated ones")
    method: Literal["exhaustive", "pso", "saq", "egreedy", "all"] = "exhaustive"

    @field_validator("arms", mode="before")
    @classmethod
    def _split_arms(cls, value):
        if isinstance(value, str):
            value = [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("arms")
    @classmethod
    def _known_arms(cls, value: List[str]) -> List[str]:
        unknown = [arm for arm in value if arm not in ARMS]
        if unknown:
            raise ConfigurationError(
                f"unknown arm(s) {', '.join(unknown)}; expected any of {', '.join(ARMS)}",
                field="arms",
            )
        if not value:
            raise ConfigurationError("at least one arm is required", field="arms")
        # canonical order keeps CSV row order independent of the flag spelling
        return [arm for arm in ARMS if arm in value]


class Scenario(BaseModel):
    """Immutable world: region, ground-BSs, attraction points and initial users"""
    model_config = ConfigDict(frozen=True)

    config: ScenarioConfig
    mode: Literal["aerial", "traditional"] = "aerial"
    ground_bss: Tuple[GroundBS, ...]
    attractors: Tuple[Point2D, ...] = ()
    user_positions: Tuple[Point2D, ...] = ()

    @property
    def region(self) -> Region:
        return self.config.region

    @property
    def serving_ground(self) -> List[GroundBS]:
        return [bs for bs in self.ground_bss if not bs.is_backhaul_anchor]

    @property
    def anchor(self) -> Optional[GroundBS]:
        return next((bs for bs in self.ground_bss if bs.is_backhaul_anchor), None)

    @property
    def aerial_bs_id(self) -> int:
        """The aerial-BS takes the id after the last ground-BS"""
        return len(self.ground_bss)

    @property
    def num_users(self) -> int:
        return len(self.user_positions)
