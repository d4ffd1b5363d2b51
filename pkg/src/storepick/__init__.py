"""In-store picker routing: simulator, exact order sequencing, and
step-policy learning for customer-populated retail store graphs."""

from .env import EnvConfig, Environment, RewardWeights, run_episode
from .graph import (
    CostMatrix,
    NodeKind,
    NoPathError,
    StoreGraph,
    StoreNode,
    crowdedness_matrix,
    distance_matrix,
    load_layout,
    save_layout,
    shortest_path,
    validate,
)
from .instances import ConcentrationProfile, LayoutSpec, build_benchmark, generate_layout
from .qlearning import QTable, TrainConfig, load_qtable, save_qtable, train
from .srp import SrpInstance, SrpSolution, build_instance, solve_cutting_planes, solve_oracle

__all__ = [
    "ConcentrationProfile",
    "CostMatrix",
    "EnvConfig",
    "Environment",
    "LayoutSpec",
    "NodeKind",
    "NoPathError",
    "QTable",
    "RewardWeights",
    "SrpInstance",
    "SrpSolution",
    "StoreGraph",
    "StoreNode",
    "TrainConfig",
    "build_benchmark",
    "build_instance",
    "crowdedness_matrix",
    "distance_matrix",
    "generate_layout",
    "load_layout",
    "load_qtable",
    "run_episode",
    "save_layout",
    "save_qtable",
    "shortest_path",
    "solve_cutting_planes",
    "solve_oracle",
    "train",
    "validate",
]

__version__ = "0.1.0"
