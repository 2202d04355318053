"""The steppable environment: joint-position control, kinematic-lite
interaction, randomized resets, and photorealistic observations.

Interaction model (contact physics is out of scope): closing the gripper
within 2 cm of an object's grasp point attaches it rigidly to the
end-effector; opening detaches and projects the object along gravity onto the
support plane or the top of an object beneath it. Unattached objects never
move. Everything is deterministic: (seed, action sequence) fixes the
trajectory and every rendered pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assets.gsdf import Camera
from ..geometry import RigidTransform
from ..kinematics import forward_kinematics, pose_scene
from ..renderer.rasterize import RenderOutput, rasterize
from ..scene import CachedStatics, EnvState, SceneAssets
from .tasks import (
    GRASP_EPSILON,
    TaskSpec,
    object_bottom_height,
    object_center_plane_uv,
    object_grasp_point,
    object_horizontal_radius,
    object_top_height,
)

JOINT_STEP_LIMIT = 0.075  # 1.5 rad/s (or m/s) at 20 Hz control
PLACEMENT_CLEARANCE = 0.03
PLACEMENT_ATTEMPTS = 1000
SETTLE_PENETRATION_TOL = 0.01  # released objects may overlap a support by this much


@dataclass
class Observation:
    images: dict[str, np.ndarray]  # camera name -> (H, W, 3) float32 color
    proprio: np.ndarray  # joint positions


class PlacementError(RuntimeError):
    pass


def sample_initial_state(assets: SceneAssets, task: TaskSpec, seed: int) -> EnvState:
    """The declared reset sampler, exposed for statistical verification.

    Object positions are uniform over the randomization region (resting on the
    support plane, captured orientation kept); pairwise surface clearance of
    3 cm is enforced by rejection.
    """
    rng = np.random.default_rng(seed)
    (u0, v0), (u1, v1) = task.randomization_region

    randomized = task.randomized_objects or tuple(range(len(assets.objects)))
    poses = [RigidTransform.identity() for _ in assets.objects]
    placed_uv: list[tuple[int, np.ndarray]] = []

    base_state = EnvState(q=task.home_q, object_poses=list(poses))
    for k in range(len(assets.objects)):
        if k not in randomized:
            placed_uv.append((k, object_center_plane_uv(base_state, assets, k)))

    for k in randomized:
        radius_k = object_horizontal_radius(assets, k)
        for attempt in range(PLACEMENT_ATTEMPTS):
            uv = np.array([rng.uniform(u0, u1), rng.uniform(v0, v1)])
            ok = True
            for j, other_uv in placed_uv:
                clearance = (
                    np.linalg.norm(uv - other_uv)
                    - radius_k
                    - object_horizontal_radius(assets, j)
                )
                if clearance < PLACEMENT_CLEARANCE:
                    ok = False
                    break
            if ok:
                break
        else:
            raise PlacementError(
                f"could not place object {k} with {PLACEMENT_CLEARANCE} m clearance "
                f"after {PLACEMENT_ATTEMPTS} attempts"
            )
        poses[k] = _pose_resting_at(assets, k, uv)
        placed_uv.append((k, uv))

    home = np.asarray(task.home_q, dtype=np.float32).astype(np.float64)  # float32 grid
    return EnvState(q=home, object_poses=poses)


def _pose_resting_at(assets: SceneAssets, k: int, uv: np.ndarray) -> RigidTransform:
    """Pose delta putting object k at plane coords uv, resting, capture orientation."""
    plane = assets.description.support_plane
    u_axis, v_axis = plane.basis()
    t_k = assets.objects[k].entry.transform
    mesh = assets.objects[k].mesh

    lo, hi = mesh.bounds()
    center_local = (lo + hi) / 2
    spin = RigidTransform(t_k.rotation)  # captured orientation, translation solved below
    rotated = spin.apply(mesh.vertices)
    low = (rotated @ plane.normal).min()  # lowest vertex along the normal
    center_off = spin.apply(center_local)

    target = (
        plane.point
        + uv[0] * u_axis
        + uv[1] * v_axis
        - (center_off - (center_off @ plane.normal) * plane.normal)
        - low * plane.normal
    )
    world = RigidTransform(t_k.rotation, target)
    return world @ t_k.inverse()


class Env:
    """Single-scene, single-task environment with an optional shared cache."""

    def __init__(
        self,
        assets: SceneAssets,
        task: TaskSpec,
        static_cache: CachedStatics | None = None,
        background_color=(0.0, 0.0, 0.0),
        color_jitter: bool = False,
        use_cache: bool = True,
    ):
        if not assets.robots:
            raise ValueError("environment needs a scene with a robot")
        self.assets = assets
        self.task = task
        self.cache = (
            static_cache
            if static_cache is not None
            else (assets.build_static_cache() if use_cache else None)
        )
        self.background_color = np.asarray(background_color, dtype=np.float64)
        self.color_jitter = color_jitter
        self._jitter_gain = np.ones(3)
        self.state: EnvState | None = None
        tree = assets.tree
        self._grip_index = [j.name for j in tree.actuated_joints].index(task.robot.gripper_joint)
        self._limits = tree.joint_limits()

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: int) -> Observation:
        self.state = sample_initial_state(self.assets, self.task, seed)
        if self.color_jitter:
            rng = np.random.default_rng((seed, 0xC010))
            self._jitter_gain = rng.uniform(0.85, 1.15) * rng.uniform(0.95, 1.05, size=3)
        else:
            self._jitter_gain = np.ones(3)
        return self.render_observation()

    def restore(self, state: EnvState) -> None:
        """Exact state restoration for failure replay."""
        if len(state.object_poses) != len(self.assets.objects):
            raise ValueError("state does not match scene object count")
        self.state = state.copy()

    # -- stepping ----------------------------------------------------------

    def _ee_pose(self, q: np.ndarray) -> RigidTransform:
        robot = self.assets.robots[0]
        poses = forward_kinematics(robot.tree, self.assets.split_q(q)[0])
        return robot.entry.base_transform @ poses[self.task.robot.ee_link]

    def _gripper_closed(self, q: np.ndarray) -> bool:
        return q[self._grip_index] < self.task.robot.gripper_closed_below

    def step(self, action: np.ndarray):
        if self.state is None:
            raise RuntimeError("reset the environment before stepping")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.state.q.shape[0]:
            raise ValueError(
                f"action length {action.shape[0]} does not match dof {self.state.q.shape[0]}"
            )
        if not np.isfinite(action).all():
            raise ValueError("action contains non-finite values")

        # Actions and joint positions are float32-canonical (the dataset
        # precision), so recorded trajectories replay bit-exactly and holding
        # the current position is a true no-op.
        action = action.astype(np.float32).astype(np.float64)

        state = self.state
        q_old = state.q
        target = np.clip(action, self._limits[:, 0], self._limits[:, 1])
        q_new = q_old + np.clip(target - q_old, -JOINT_STEP_LIMIT, JOINT_STEP_LIMIT)
        q_new = q_new.astype(np.float32).astype(np.float64)

        ee_old = self._ee_pose(q_old)
        ee_new = self._ee_pose(q_new)
        attached = state.gripper_attached
        poses = list(state.object_poses)

        if attached is not None:
            t_k = self.assets.objects[attached].entry.transform
            rel = ee_old.inverse() @ (poses[attached] @ t_k)
            poses[attached] = ee_new @ rel @ t_k.inverse()

        was_closed = self._gripper_closed(q_old)
        now_closed = self._gripper_closed(q_new)
        mid_state = EnvState(q=q_new, object_poses=poses, gripper_attached=attached,
                             step_index=state.step_index)

        if now_closed and not was_closed and attached is None:
            attached = self._try_attach(mid_state, ee_new)
        elif was_closed and not now_closed and attached is not None:
            poses[attached] = self._settle(mid_state, attached)
            attached = None

        self.state = EnvState(
            q=q_new,
            object_poses=poses,
            gripper_attached=attached,
            step_index=state.step_index + 1,
        )

        success = bool(self.task.success(self.state, self.assets))
        partial = bool(self.task.partial_credit(self.state, self.assets))
        reward = 1.0 if success else (0.5 if partial else 0.0)
        terminated = success
        truncated = (not terminated) and self.state.step_index >= self.task.max_steps
        info = {"state": self.state.copy()}
        return self.render_observation(), reward, terminated, truncated, info

    def _try_attach(self, state: EnvState, ee: RigidTransform) -> int | None:
        best, best_dist = None, GRASP_EPSILON
        for k in range(len(self.assets.objects)):
            d = float(np.linalg.norm(object_grasp_point(state, self.assets, k) - ee.translation))
            if d <= best_dist:
                best, best_dist = k, d
        return best

    def _settle(self, state: EnvState, k: int) -> RigidTransform:
        """Project object k along gravity onto the plane or a surface beneath it."""
        bottom = object_bottom_height(state, self.assets, k)
        uv_k = object_center_plane_uv(state, self.assets, k)

        support = 0.0
        for j in range(len(self.assets.objects)):
            if j == k:
                continue
            top_j = object_top_height(state, self.assets, j)
            if top_j > bottom + SETTLE_PENETRATION_TOL:
                continue  # not beneath
            duv = np.linalg.norm(uv_k - object_center_plane_uv(state, self.assets, j))
            if duv <= object_horizontal_radius(self.assets, j):
                support = max(support, top_j)

        drop = bottom - support
        # gravity_dir points through the table; shift by the gap along it
        shift = self.assets.description.gravity_dir * drop
        return RigidTransform(translation=shift) @ state.object_poses[k]

    # -- rendering ---------------------------------------------------------

    def _camera_pose(self, cam: Camera) -> Camera:
        if cam.mount_link is None:
            return cam
        robot = self.assets.robots[0]
        if cam.mount_robot is not None:
            robot = next(r for r in self.assets.robots if r.entry.name == cam.mount_robot)
        poses = forward_kinematics(robot.tree, self.assets.split_q(self.state.q)[0])
        offset = cam.mount_offset or RigidTransform.identity()
        cam_to_world = robot.entry.base_transform @ poses[cam.mount_link] @ offset
        return cam.with_pose(cam_to_world.inverse())

    def render_observation(self, camera_names=None) -> Observation:
        if self.state is None:
            raise RuntimeError("reset the environment before rendering")
        names = tuple(camera_names) if camera_names is not None else self.task.cameras
        posed = pose_scene(self.assets, self.state, self.cache)
        sets = posed.sets()
        images = {}
        for name in names:
            cam = self._camera_pose(self.assets.description.camera(name))
            out = rasterize(sets, cam, self.background_color)
            color = out.color
            if self.color_jitter:
                color = np.clip(color * self._jitter_gain.astype(np.float32), 0.0, 1.0)
            images[name] = color
        return Observation(images=images, proprio=self.state.q.copy())

    def render_full(self, camera_name: str) -> RenderOutput:
        """Color/depth/alpha render of one camera (no jitter)."""
        posed = pose_scene(self.assets, self.state, self.cache)
        cam = self._camera_pose(self.assets.description.camera(camera_name))
        return rasterize(posed.sets(), cam, self.background_color)
