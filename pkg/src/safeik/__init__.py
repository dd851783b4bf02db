"""safeik: safety-aware shared-autonomy inverse kinematics.

Blend operator and autonomy pose commands in SE(3), then solve a constrained
IK problem per control tick. Three solvers share one objective: "N" ignores
obstacles, "P" adds a soft proximity penalty, "B" enforces collision safety
as a hard discrete barrier-function inequality.
"""

from importlib import resources

from .blending import ArbitrationParams, BlendInput, arbitration_weight, blend_pose
from .collision import (
    Capsule,
    DistanceWitness,
    capsule_signed_distance,
    distance_gradient,
    min_robot_obstacle_distance,
    segment_closest_points,
)
from .ik import (
    CbfParams,
    IkParams,
    ManipulabilityParams,
    ObjectiveWeights,
    PenaltyParams,
    SolverState,
    cbf_constraint,
    class_k,
    manipulability_constraint,
    penalty_objective,
    self_collision_objective,
    smoothness_objective,
    solve_step,
    tracking_objective,
)
from .robot import (
    JointSpec,
    Kinematics,
    LinkCollider,
    RobotModel,
    forward_kinematics,
    geometric_jacobian,
    link_capsules_world,
    load_robot,
    serialize_robot,
)
from .config import RunConfig, TeleopConfig, load_run_config
from .metrics import MetricsReport, batch_compare, compute_metrics
from .rollout import RolloutLog, run_rollout
from .scenes import MotionProfile, ReferenceTrajectory, Scene, make_scene, obstacle_poses_at
from .se3 import Pose
from .sqp import NlpProblem, SolveOptions, SolveResult, SqpSolver, minimize, solve_qp
from .teleop import TeleopServer, TeleopSession, serve

__version__ = "0.1.0"


def bundled_robot_text(name: str = "arm7") -> str:
    """Text of a robot description shipped with the package."""
    return resources.files("safeik.data").joinpath(f"{name}.yaml").read_text()


def load_bundled_robot(name: str = "arm7") -> RobotModel:
    return load_robot(bundled_robot_text(name))
