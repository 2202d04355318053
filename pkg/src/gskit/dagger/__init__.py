"""DAgger failure-replay harness and reference policies."""

from .harness import (
    AggregatedDataset,
    dagger_iterate,
    merge_real,
    restore_and_correct,
    rollout,
    sample_recovery_state,
)
from .policies import NearestNeighborMimic, PerturbedExpertPolicy, RandomPolicy, ReplayPolicy

__all__ = [
    "AggregatedDataset",
    "NearestNeighborMimic",
    "PerturbedExpertPolicy",
    "RandomPolicy",
    "ReplayPolicy",
    "dagger_iterate",
    "merge_real",
    "restore_and_correct",
    "rollout",
    "sample_recovery_state",
]
