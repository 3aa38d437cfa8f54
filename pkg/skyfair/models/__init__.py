from .scenario import (
    AERIAL_ARMS,
    ARMS,
    PLACE_METHODS,
    ExperimentOptions,
    GroundBS,
    Region,
    Scenario,
    ScenarioConfig,
)
from .network import AssociationMatrix, Cell, LinkReport, NetworkState, UserMotion
from .learning import (
    NUM_ACTIONS,
    Action,
    CandidateEvaluation,
    ConstraintReport,
    Lattice,
    LearnParams,
    RewardTerms,
)
from .metrics import ConvergenceRow, MetricsLog, MetricsRow, RunManifest
