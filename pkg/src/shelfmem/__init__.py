"""Evidential shelf mapping with next-best views and informed pushing."""

from .belief import BeliefState, ContractError, GridSpec
from .config import ExperimentConfig, load_config
from .metrics import compare_methods, miou
from .planner import EpisodeLog, PlannerConfig, replay, run_batch, run_episode
from .scene import Scene, generate_scene

__version__ = "0.1.0"

__all__ = [
    "BeliefState",
    "ContractError",
    "EpisodeLog",
    "ExperimentConfig",
    "GridSpec",
    "PlannerConfig",
    "Scene",
    "compare_methods",
    "generate_scene",
    "load_config",
    "miou",
    "replay",
    "run_batch",
    "run_episode",
]
