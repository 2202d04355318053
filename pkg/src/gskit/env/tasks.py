"""Task definitions and the two shipped toy tasks.

A task owns the randomization region, the success / partial-credit / solvable
predicates, the step budget, the observation cameras, and a factory for its
scripted waypoint expert. Predicates are pure functions of (EnvState,
SceneAssets) so the DAgger harness can evaluate them on recorded states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..scene import EnvState, SceneAssets

GRASP_EPSILON = 0.02  # meters: gripper-to-grasp-point attach distance


@dataclass(frozen=True)
class RobotInterface:
    """How the env drives the scene's robot."""

    ee_link: str
    gripper_joint: str
    gripper_closed_below: float
    gripper_open_value: float


@dataclass(frozen=True)
class TaskSpec:
    name: str
    randomization_region: np.ndarray  # [[u0, v0], [u1, v1]] in support-plane coords
    success: Callable[[EnvState, SceneAssets], bool]
    partial_credit: Callable[[EnvState, SceneAssets], bool]
    max_steps: int
    cameras: tuple[str, ...]
    home_q: np.ndarray
    robot: RobotInterface
    solvable: Callable[[EnvState, SceneAssets], bool]
    expert_factory: Callable[[SceneAssets], object]
    randomized_objects: tuple[int, ...] = ()  # indices; () = all


def _object_frame(state: EnvState, assets: SceneAssets, k: int):
    return state.object_poses[k] @ assets.objects[k].entry.transform


def object_bottom_height(state: EnvState, assets: SceneAssets, k: int) -> float:
    verts = _object_frame(state, assets, k).apply(assets.objects[k].mesh.vertices)
    return float(assets.description.support_plane.height_of(verts).min())


def object_top_height(state: EnvState, assets: SceneAssets, k: int) -> float:
    verts = _object_frame(state, assets, k).apply(assets.objects[k].mesh.vertices)
    return float(assets.description.support_plane.height_of(verts).max())


def object_grasp_point(state: EnvState, assets: SceneAssets, k: int) -> np.ndarray:
    """Top-center of the object's bounding box, world frame."""
    lo, hi = assets.objects[k].mesh.bounds()
    local = np.array([(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, hi[2]])
    return _object_frame(state, assets, k).apply(local)


def object_center_plane_uv(state: EnvState, assets: SceneAssets, k: int) -> np.ndarray:
    lo, hi = assets.objects[k].mesh.bounds()
    center = _object_frame(state, assets, k).apply((lo + hi) / 2)
    plane = assets.description.support_plane
    u, v = plane.basis()
    rel = center - plane.point
    return np.array([rel @ u, rel @ v])


def object_horizontal_radius(assets: SceneAssets, k: int) -> float:
    mesh = assets.objects[k].mesh
    lo, hi = mesh.bounds()
    center = (lo + hi) / 2
    return float(np.linalg.norm((mesh.vertices - center)[:, :2], axis=1).max())


def _default_solvable(state: EnvState, assets: SceneAssets) -> bool:
    """Shipped default: objects on the table, attachment bookkeeping consistent."""
    plane = assets.description.support_plane
    u, v = plane.basis()
    for k in range(len(assets.objects)):
        if state.gripper_attached == k:
            continue
        uv = object_center_plane_uv(state, assets, k)
        if np.abs(uv).max() > 0.6:  # off the table entirely
            return False
        if object_bottom_height(state, assets, k) < -1e-3:  # sunk through the table
            return False
    if state.gripper_attached is not None and state.gripper_attached >= len(assets.objects):
        return False
    return True


def _stacked_on(state: EnvState, assets: SceneAssets, top: int, base: int,
                xy_tol: float = 0.04, z_tol: float = 1e-3) -> bool:
    if state.gripper_attached == top:
        return False
    gap = object_bottom_height(state, assets, top) - object_top_height(state, assets, base)
    if abs(gap) > z_tol:
        return False
    duv = object_center_plane_uv(state, assets, top) - object_center_plane_uv(state, assets, base)
    return float(np.linalg.norm(duv)) <= xy_tol


class _GantryPickPlaceExpert:
    """Waypoint expert for the gantry scenes: a pure function of state.

    Works from any reachable state, which is what makes corrective rollouts
    from sampled recovery states complete.
    """

    policy_id = "scripted-expert"

    def __init__(self, assets: SceneAssets, pick: int, place_on: int,
                 robot: RobotInterface, home_q: np.ndarray):
        self.assets = assets
        self.pick = pick
        self.place_on = place_on
        self.robot = robot
        self.home_q = np.asarray(home_q, dtype=np.float64)
        tree = assets.tree
        names = [j.name for j in tree.actuated_joints]
        self.grip_index = names.index(robot.gripper_joint)
        # Gantry axes: EE world position is (qx, qy, ee_height(qz)).
        self.axis_index = {n: i for i, n in enumerate(names)}

    def _ee_target_q(self, q: np.ndarray, xy: np.ndarray, z: float, grip: float) -> np.ndarray:
        target = q.copy()
        target[0] = xy[0]
        target[1] = xy[1]
        target[2] = self._descend_for(z)
        target[self.grip_index] = grip
        return target

    def _descend_for(self, world_z: float) -> float:
        # slide_z moves the EE down from its raised height; see toy URDF.
        from .toy import EE_RAISED_HEIGHT

        return EE_RAISED_HEIGHT - world_z

    def act(self, observation, state: EnvState) -> np.ndarray:
        from ..kinematics import forward_kinematics

        assets, robot = self.assets, self.robot
        q = state.q
        poses = forward_kinematics(assets.tree, q)
        ee = (assets.robots[0].entry.base_transform @ poses[robot.ee_link]).translation

        open_g, closed_g = robot.gripper_open_value, 0.0
        safe_z = 0.30
        pick_grasp = object_grasp_point(state, assets, self.pick)
        place_top = object_top_height(state, assets, self.place_on)
        place_uv = object_center_plane_uv(state, assets, self.place_on)
        pick_height = object_top_height(state, assets, self.pick) - object_bottom_height(
            state, assets, self.pick
        )

        if state.gripper_attached == self.pick:
            carry_z = place_top + pick_height + 0.02
            if np.linalg.norm(ee[:2] - place_uv) > 0.004:
                if ee[2] < carry_z - 0.01:  # rise before translating
                    return self._ee_target_q(q, ee[:2], carry_z, closed_g)
                return self._ee_target_q(q, place_uv, carry_z, closed_g)
            if ee[2] > place_top + pick_height + 0.004:
                return self._ee_target_q(q, place_uv, place_top + pick_height, closed_g)
            return self._ee_target_q(q, place_uv, place_top + pick_height, open_g)

        gripper_closed = q[self.grip_index] < robot.gripper_closed_below
        if gripper_closed:  # empty but closed: retreat and reopen
            return self._ee_target_q(q, ee[:2], safe_z, open_g)
        if np.linalg.norm(ee[:2] - pick_grasp[:2]) > 0.004:
            if ee[2] < safe_z - 0.01:
                return self._ee_target_q(q, ee[:2], safe_z, open_g)
            return self._ee_target_q(q, pick_grasp[:2], safe_z, open_g)
        if ee[2] > pick_grasp[2] + 0.004:
            return self._ee_target_q(q, pick_grasp[:2], pick_grasp[2], open_g)
        return self._ee_target_q(q, pick_grasp[:2], pick_grasp[2], closed_g)


_GANTRY_ROBOT = RobotInterface(
    ee_link="ee",
    gripper_joint="gripper",
    gripper_closed_below=0.015,
    gripper_open_value=0.04,
)
_GANTRY_HOME = np.array([0.0, 0.0, 0.05, 0.04])
_REGION_45 = np.array([[-0.225, -0.225], [0.225, 0.225]])


def _place_box_spec() -> TaskSpec:
    def success(state, assets):
        return _stacked_on(state, assets, top=0, base=1)

    def partial(state, assets):
        return state.gripper_attached == 0 or success(state, assets)

    return TaskSpec(
        name="place_box",
        randomization_region=_REGION_45,
        success=success,
        partial_credit=partial,
        max_steps=80,
        cameras=("front",),
        home_q=_GANTRY_HOME,
        robot=_GANTRY_ROBOT,
        solvable=_default_solvable,
        expert_factory=lambda assets: _GantryPickPlaceExpert(
            assets, pick=0, place_on=1, robot=_GANTRY_ROBOT, home_q=_GANTRY_HOME
        ),
        randomized_objects=(0,),  # the box stays put so placement is repeatable
    )


def _stack_cans_spec() -> TaskSpec:
    def success(state, assets):
        return _stacked_on(state, assets, top=0, base=1)

    def partial(state, assets):
        return state.gripper_attached == 0 or success(state, assets)

    return TaskSpec(
        name="stack_cans",
        randomization_region=_REGION_45,
        success=success,
        partial_credit=partial,
        max_steps=100,
        cameras=("front",),
        home_q=_GANTRY_HOME,
        robot=_GANTRY_ROBOT,
        solvable=_default_solvable,
        expert_factory=lambda assets: _GantryPickPlaceExpert(
            assets, pick=0, place_on=1, robot=_GANTRY_ROBOT, home_q=_GANTRY_HOME
        ),
        randomized_objects=(0, 1),
    )


TASKS: dict[str, Callable[[], TaskSpec]] = {
    "place_box": _place_box_spec,
    "stack_cans": _stack_cans_spec,
}


def get_task(name: str) -> TaskSpec:
    if name not in TASKS:
        raise KeyError(f"unknown task '{name}' (have: {sorted(TASKS)})")
    return TASKS[name]()
