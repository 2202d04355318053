"""Steppable simulation environments, tasks, batching, and dataset storage."""

from .batch import EnvBatch, make_parallel
from .dataset import (
    DatasetWriter,
    TrajectoryRecord,
    load_frame,
    read_dataset,
    read_manifest,
    read_trajectory,
    write_trajectory,
)
from .sim import Env, Observation, PlacementError, sample_initial_state
from .tasks import TASKS, RobotInterface, TaskSpec, get_task
from .toy import write_toy_scene

__all__ = [
    "DatasetWriter",
    "Env",
    "EnvBatch",
    "Observation",
    "PlacementError",
    "RobotInterface",
    "TASKS",
    "TaskSpec",
    "TrajectoryRecord",
    "get_task",
    "load_frame",
    "make_parallel",
    "read_dataset",
    "read_manifest",
    "read_trajectory",
    "sample_initial_state",
    "write_toy_scene",
    "write_trajectory",
]
