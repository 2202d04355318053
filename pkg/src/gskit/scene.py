"""Loaded scenes: GSDF descriptions resolved into in-memory assets.

The static-splat cache built here is the single shared copy of everything
that never moves (background plus unlabeled robot-scan splats). Parallel
environments all borrow it read-only; only robot links and objects are
re-posed per state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assets.gaussians import GaussianSet, concatenate_sets
from .assets.gsdf import ObjectEntry, RobotEntry, SceneDescription, load_gsdf, scene_hash, validate_scene
from .assets.mesh import TriangleMesh, load_mesh
from .assets.ply import load_splat_file
from .assets.urdf import KinematicTree, load_kinematic_tree
from .geometry import RigidTransform


@dataclass
class EnvState:
    """s = (q, x^1..x^n): joint positions plus per-object pose deltas.

    object_poses are world-frame transforms composed on top of each object's
    captured placement; identity means "exactly where it was scanned".
    """

    q: np.ndarray
    object_poses: list[RigidTransform]
    gripper_attached: int | None = None
    step_index: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64).reshape(-1)
        if self.gripper_attached is not None and self.gripper_attached >= len(self.object_poses):
            raise ValueError("gripper_attached index out of range")

    def copy(self) -> "EnvState":
        return EnvState(
            q=self.q.copy(),
            object_poses=list(self.object_poses),
            gripper_attached=self.gripper_attached,
            step_index=self.step_index,
        )

    def allclose(self, other: "EnvState", tol: float = 1e-12) -> bool:
        if self.gripper_attached != other.gripper_attached or self.step_index != other.step_index:
            return False
        if self.q.shape != other.q.shape or np.abs(self.q - other.q).max(initial=0.0) > tol:
            return False
        if len(self.object_poses) != len(other.object_poses):
            return False
        return all(a.almost_equal(b, tol) for a, b in zip(self.object_poses, other.object_poses))

    def as_dict(self) -> dict:
        return {
            "q": [float(v) for v in self.q],
            "object_poses": [p.as_dict() for p in self.object_poses],
            "gripper_attached": self.gripper_attached,
            "step_index": self.step_index,
        }

    @staticmethod
    def from_dict(d: dict) -> "EnvState":
        return EnvState(
            q=np.asarray(d["q"], dtype=np.float64),
            object_poses=[RigidTransform.from_dict(p) for p in d["object_poses"]],
            gripper_attached=d.get("gripper_attached"),
            step_index=int(d.get("step_index", 0)),
        )


@dataclass
class RobotAssets:
    entry: RobotEntry
    tree: KinematicTree
    splats: GaussianSet  # labeled splats link-local, unlabeled world-frame
    labels: np.ndarray  # (N,), -1 = static background residue

    def link_splats(self, link_index: int) -> GaussianSet:
        return self.splats.select(self.labels == link_index)


@dataclass
class ObjectAssets:
    entry: ObjectEntry
    splats: GaussianSet  # asset frame
    mesh: TriangleMesh  # asset frame


@dataclass
class CachedStatics:
    """One immutable world-frame copy of every splat that never moves."""

    splats: GaussianSet

    def __post_init__(self):
        for arr in (
            self.splats.centroids,
            self.splats.rotations,
            self.splats.scales_log,
            self.splats.opacities_logit,
            self.splats.sh_coeffs,
        ):
            arr.setflags(write=False)

    @property
    def nbytes(self) -> int:
        return self.splats.nbytes()


@dataclass
class SceneAssets:
    description: SceneDescription
    background: GaussianSet
    robots: list[RobotAssets] = field(default_factory=list)
    objects: list[ObjectAssets] = field(default_factory=list)
    path: Path | None = None
    gsdf_hash: str | None = None

    @property
    def tree(self) -> KinematicTree:
        if not self.robots:
            raise ValueError("scene has no robots")
        return self.robots[0].tree

    @property
    def dof(self) -> int:
        return sum(r.tree.dof for r in self.robots)

    def canonical_state(self) -> EnvState:
        """The captured configuration: scan-time joint pose, objects at rest."""
        qs = []
        for r in self.robots:
            qs.append(r.entry.captured_q if r.entry.captured_q is not None else np.zeros(r.tree.dof))
        q = np.concatenate(qs) if qs else np.zeros(0)
        return EnvState(q=q, object_poses=[RigidTransform.identity() for _ in self.objects])

    def build_static_cache(self) -> CachedStatics:
        parts = [self.background]
        for r in self.robots:
            residue = r.splats.select(r.labels == -1)
            if residue.count:
                parts.append(residue)
        return CachedStatics(concatenate_sets(parts))

    def object_world_pose(self, state: EnvState, k: int) -> RigidTransform:
        """World pose of object k's asset frame under the given state."""
        return state.object_poses[k] @ self.objects[k].entry.transform

    def split_q(self, q: np.ndarray) -> list[np.ndarray]:
        out, i = [], 0
        for r in self.robots:
            out.append(q[i : i + r.tree.dof])
            i += r.tree.dof
        if i != q.shape[0]:
            raise ValueError(f"joint vector length {q.shape[0]} does not match scene dof {i}")
        return out


def load_scene_assets(gsdf_path) -> SceneAssets:
    gsdf_path = Path(gsdf_path)
    scene = load_gsdf(gsdf_path)
    report = validate_scene(scene)
    if not report.ok:
        raise ValueError("scene failed validation: " + "; ".join(report.problems))

    background = load_splat_file(scene.resolve(scene.background))

    robots = []
    for entry in scene.robots:
        tree = load_kinematic_tree(scene.resolve(entry.tree))
        splats = load_splat_file(scene.resolve(entry.splats))
        labels = entry.link_labels
        if labels is None:
            labels = np.full(splats.count, -1, dtype=np.int64)
        robots.append(RobotAssets(entry=entry, tree=tree, splats=splats, labels=labels))

    objects = []
    for entry in scene.objects:
        objects.append(
            ObjectAssets(
                entry=entry,
                splats=load_splat_file(scene.resolve(entry.splats)),
                mesh=load_mesh(scene.resolve(entry.mesh)),
            )
        )

    return SceneAssets(
        description=scene,
        background=background,
        robots=robots,
        objects=objects,
        path=gsdf_path,
        gsdf_hash=scene_hash(gsdf_path),
    )
