"""navmix: crowd-aware navigation planning with weighted plan mixtures.

A global-plan distribution (diverse grid routes, operator conditioning), a
sampled local trajectory prior, coupling potentials, sampling-based MAP
inference, and a deterministic receding-horizon simulator with a live
operator gateway.
"""

from .config import (
    GlobalPlanConfig,
    InferenceConfig,
    ModelConfig,
    PlannerConfig,
    PotentialConfig,
)
from .global_planner import (
    GlobalPlanDistribution,
    GoalSet,
    OperatorEvidence,
    astar,
    build_distribution,
    condition_on_joystick,
    k_diverse_plans,
    plan_weights,
)
from .inference import (
    DiscreteInstance,
    InferenceReport,
    MapAssignment,
    brute_force_map,
    brute_force_report,
    importance_sample_map,
    mh_sample_map,
    next_action,
)
from .local_models import (
    AgentTrack,
    CrowdBelief,
    RobotState,
    predict_crowd,
    robot_prior_density,
    sample_robot_prior,
    visible_tracks,
)
from .potentials import (
    HierarchyLevels,
    chain_density,
    crowd_interaction,
    joint_density,
    plan_agreement,
)
from .simulator import RunLog, Scenario, load_scenario, run, tick
from .trajectory import (
    OccupancyGrid,
    Pose,
    Trajectory,
    project_progress,
    resample,
    squared_deviation,
    window_plan,
)

__version__ = "0.1.0"
