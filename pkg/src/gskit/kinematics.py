"""Forward kinematics and rigid posing of Gaussian sets.

All operations here are pure: FK maps (tree, q) to per-link world poses,
transform_gaussians rigidly moves a splat set, and pose_scene assembles the
world-frame splats for one environment state while borrowing the static
cache instead of copying it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .assets.gaussians import GaussianSet
from .assets.urdf import KinematicTree
from .geometry import RigidTransform, quat_from_axis_angle, quat_mul
from .scene import CachedStatics, EnvState, SceneAssets

JOINT_CLAMP_EPS = 1e-6


def clamp_joints(tree: KinematicTree, q: np.ndarray, warn: bool = True) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != tree.dof:
        raise ValueError(f"joint vector length {q.shape[0]} does not match tree dof {tree.dof}")
    limits = tree.joint_limits()
    if limits.size == 0:
        return q
    clamped = np.clip(q, limits[:, 0], limits[:, 1])
    if warn and np.any(np.abs(clamped - q) > JOINT_CLAMP_EPS):
        warnings.warn("joint values outside limits were clamped", stacklevel=2)
    return clamped


def forward_kinematics(tree: KinematicTree, q: np.ndarray) -> dict[str, RigidTransform]:
    """World pose of every link; the root link is the identity frame."""
    q = clamp_joints(tree, q)
    poses = {tree.root: RigidTransform.identity()}
    qi = 0
    for joint in tree.joints:  # topological order: parent pose already known
        parent_pose = poses[joint.parent]
        if joint.joint_type == "revolute":
            motion = RigidTransform(quat_from_axis_angle(joint.axis, q[qi]))
            qi += 1
        elif joint.joint_type == "prismatic":
            motion = RigidTransform(translation=joint.axis * q[qi])
            qi += 1
        else:
            motion = RigidTransform.identity()
        poses[joint.child] = parent_pose @ joint.origin @ motion
    return poses


def joint_world_frames(tree: KinematicTree, q: np.ndarray) -> list[tuple[RigidTransform, "object"]]:
    """World frame of each actuated joint (pose includes the joint origin)."""
    q = clamp_joints(tree, q)
    poses = {tree.root: RigidTransform.identity()}
    frames = []
    qi = 0
    for joint in tree.joints:
        frame = poses[joint.parent] @ joint.origin
        if joint.joint_type == "revolute":
            frames.append((frame, joint))
            motion = RigidTransform(quat_from_axis_angle(joint.axis, q[qi]))
            qi += 1
        elif joint.joint_type == "prismatic":
            frames.append((frame, joint))
            motion = RigidTransform(translation=joint.axis * q[qi])
            qi += 1
        else:
            motion = RigidTransform.identity()
        poses[joint.child] = frame @ motion
    return frames


def jacobian(tree: KinematicTree, q: np.ndarray, link: str) -> np.ndarray:
    """6 x dof geometric Jacobian (linear; angular) of a link origin, world frame."""
    poses = forward_kinematics(tree, q)
    if link not in poses:
        raise KeyError(f"unknown link '{link}'")
    p_link = poses[link].translation

    # Which joints lie on the chain from root to `link`?
    parent_of = {j.child: j for j in tree.joints}
    chain = set()
    cursor = link
    while cursor in parent_of:
        chain.add(parent_of[cursor].name)
        cursor = parent_of[cursor].parent

    J = np.zeros((6, tree.dof))
    for col, (frame, joint) in enumerate(joint_world_frames(tree, q)):
        if joint.name not in chain:
            continue
        axis_w = frame.rotation_matrix() @ joint.axis
        if joint.joint_type == "revolute":
            J[:3, col] = np.cross(axis_w, p_link - frame.translation)
            J[3:, col] = axis_w
        else:
            J[:3, col] = axis_w
    return J


def _quat_mul_batch(q: np.ndarray, batch: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    bw, bx, by, bz = batch[:, 0], batch[:, 1], batch[:, 2], batch[:, 3]
    return np.stack(
        [
            w * bw - x * bx - y * by - z * bz,
            w * bx + x * bw + y * bz - z * by,
            w * by - x * bz + y * bw + z * bx,
            w * bz + x * by - y * bx + z * bw,
        ],
        axis=1,
    )


def transform_gaussians(gset: GaussianSet, transform: RigidTransform) -> GaussianSet:
    """Rigidly move a splat set; appearance payloads are shared, not copied.

    SH coefficients stay in their stored frame; the composed frame rotation is
    recorded so the renderer can evaluate them at the back-rotated view
    direction (exact for every degree, no coefficient rotation needed).
    """
    rot = transform.rotation
    rotations = _quat_mul_batch(rot, gset.rotations)
    norms = np.linalg.norm(rotations, axis=1, keepdims=True)
    rotations = rotations / norms

    prev = gset.sh_frame_rotation
    sh_rot = rot if prev is None else quat_mul(rot, prev)

    return GaussianSet(
        centroids=transform.apply(gset.centroids),
        rotations=rotations,
        scales_log=gset.scales_log,
        opacities_logit=gset.opacities_logit,
        sh_coeffs=gset.sh_coeffs,
        features=gset.features,
        sh_frame_rotation=sh_rot,
    )


@dataclass(frozen=True)
class PosedSplats:
    """World-frame splats for one state: borrowed statics plus fresh movables.

    Deterministic order: static set (background plus unlabeled robot splats),
    then robot links in tree order per robot, then objects in scene order.
    """

    static: GaussianSet
    robot_links: list[GaussianSet]
    objects: list[GaussianSet]

    def sets(self) -> list[GaussianSet]:
        return [self.static, *self.robot_links, *self.objects]

    def dynamic_nbytes(self) -> int:
        return sum(s.nbytes() for s in [*self.robot_links, *self.objects])


def pose_scene(
    assets: SceneAssets,
    state: EnvState,
    static_cache: CachedStatics | None,
) -> PosedSplats:
    """Assemble world-frame splats for a state.

    With a cache, the static set is borrowed (never copied). Passing None
    rebuilds the statics from the raw assets — the slow path used to verify
    cache equivalence.
    """
    if len(state.object_poses) != len(assets.objects):
        raise ValueError(
            f"state has {len(state.object_poses)} object poses for {len(assets.objects)} objects"
        )

    static = static_cache.splats if static_cache is not None else assets.build_static_cache().splats

    robot_links: list[GaussianSet] = []
    for robot, q in zip(assets.robots, assets.split_q(state.q)):
        poses = forward_kinematics(robot.tree, q)
        base = robot.entry.base_transform
        for index, link in enumerate(robot.tree.links):
            part = robot.link_splats(index)
            if part.count == 0:
                continue
            robot_links.append(transform_gaussians(part, base @ poses[link.name]))

    objects: list[GaussianSet] = []
    for k, obj in enumerate(assets.objects):
        world = state.object_poses[k] @ obj.entry.transform
        objects.append(transform_gaussians(obj.splats, world))

    return PosedSplats(static=static, robot_links=robot_links, objects=objects)
