"""Policy implementations for rollouts and the DAgger loop.

A policy maps (Observation, privileged EnvState) to a joint-target action and
may expose begin_episode(seed) for per-episode determinism and fit(records)
for policies rebuilt from aggregated data.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..scene import EnvState


class RandomPolicy:
    """Uniform joint targets within limits; deterministic per episode seed."""

    policy_id = "random"

    def __init__(self, limits: np.ndarray):
        self.limits = np.asarray(limits, dtype=np.float64).reshape(-1, 2)
        self._rng = np.random.default_rng(0)

    def begin_episode(self, seed: int) -> None:
        self._rng = np.random.default_rng((int(seed), 0xA11))

    def act(self, observation, state: EnvState) -> np.ndarray:
        return self._rng.uniform(self.limits[:, 0], self.limits[:, 1])


class ReplayPolicy:
    """Replays a recorded action sequence verbatim."""

    policy_id = "replay"

    def __init__(self, actions: np.ndarray):
        self.actions = np.asarray(actions, dtype=np.float64)
        self._cursor = 0

    def begin_episode(self, seed: int) -> None:
        self._cursor = 0

    def act(self, observation, state: EnvState) -> np.ndarray:
        idx = min(self._cursor, len(self.actions) - 1)
        self._cursor += 1
        return self.actions[idx]


class PerturbedExpertPolicy:
    """Expert with a constant approach-phase bias: a stand-in policy whose
    failures are genuine (missed grasps) but whose states stay recoverable."""

    def __init__(self, expert, bias: float = 0.05, axis: int = 0, grip_index: int = 3,
                 closed_below: float = 0.015):
        self.expert = expert
        self.bias = bias
        self.axis = axis
        self.grip_index = grip_index
        self.closed_below = closed_below
        self.policy_id = f"perturbed-{getattr(expert, 'policy_id', 'expert')}"

    def begin_episode(self, seed: int) -> None:
        if hasattr(self.expert, "begin_episode"):
            self.expert.begin_episode(seed)

    def act(self, observation, state: EnvState) -> np.ndarray:
        action = np.array(self.expert.act(observation, state), dtype=np.float64)
        if state.gripper_attached is None and state.q[self.grip_index] >= self.closed_below:
            action[self.axis] += self.bias
        return action


class NearestNeighborMimic:
    """1-nearest-neighbor state mimic: replays the action of the most similar
    recorded state. Exists to demonstrate the DAgger loop closes; success
    tracks how densely the aggregate covers the states a rollout visits."""

    policy_id = "nn-mimic"

    def __init__(self, q_weight: float = 0.5, object_weight: float = 1.0,
                 attach_weight: float = 0.2):
        self.q_weight = q_weight
        self.object_weight = object_weight
        self.attach_weight = attach_weight
        self._tree: cKDTree | None = None
        self._actions: np.ndarray | None = None

    def _features(self, state: EnvState) -> np.ndarray:
        parts = [self.q_weight * state.q]
        for k, pose in enumerate(state.object_poses):
            parts.append(self.object_weight * pose.translation)
            parts.append([self.attach_weight * float(state.gripper_attached == k)])
        return np.concatenate([np.asarray(p, dtype=np.float64).reshape(-1) for p in parts])

    def fit(self, records) -> None:
        feats, actions = [], []
        for rec in records:
            if rec.excluded_from_training:
                continue
            for t, state in enumerate(rec.states):
                feats.append(self._features(state))
                actions.append(rec.actions[t])
        if not feats:
            raise ValueError("cannot fit mimic on an empty aggregate")
        self._tree = cKDTree(np.asarray(feats))
        self._actions = np.asarray(actions, dtype=np.float64)

    def act(self, observation, state: EnvState) -> np.ndarray:
        if self._tree is None:
            raise RuntimeError("mimic policy has not been fitted")
        _, idx = self._tree.query(self._features(state))
        return self._actions[int(idx)]
