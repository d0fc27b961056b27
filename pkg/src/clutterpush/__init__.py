"""Planar clutter manipulation: push simulation, grasp scoring, tree search."""

from .geometry import CONTACT_EPS, ConvexPolygon, Pose2D, Vec2
from .grasp import GraspAction, GripperSpec, is_grasp_feasible, max_grasp_reward, reward_map
from .planner import (
    EpisodeLog,
    PlannerConfig,
    derive_seed,
    greedy_baseline,
    greedy_episode,
    mcts_search,
    vft_episode,
)
from .push_sim import (
    EFFECTIVE_PUSH_CM,
    GripperFootprint,
    InvalidPushError,
    PushAction,
    PushResult,
    SimParams,
    effective_push_action,
    simulate_push,
)
from .scene import GRID_N, WORKSPACE_CM, ObjectSpec, Scene, load_scenario, save_scenario, scene_hash

__version__ = "0.1.0"

__all__ = [
    "CONTACT_EPS",
    "ConvexPolygon",
    "Pose2D",
    "Vec2",
    "GraspAction",
    "GripperSpec",
    "is_grasp_feasible",
    "max_grasp_reward",
    "reward_map",
    "EpisodeLog",
    "PlannerConfig",
    "derive_seed",
    "greedy_baseline",
    "greedy_episode",
    "mcts_search",
    "vft_episode",
    "EFFECTIVE_PUSH_CM",
    "GripperFootprint",
    "InvalidPushError",
    "PushAction",
    "PushResult",
    "SimParams",
    "effective_push_action",
    "simulate_push",
    "GRID_N",
    "WORKSPACE_CM",
    "ObjectSpec",
    "Scene",
    "load_scenario",
    "save_scenario",
    "scene_hash",
    "__version__",
]
