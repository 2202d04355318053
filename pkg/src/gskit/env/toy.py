"""Self-contained toy scenes for the shipped tasks.

Generates every asset a scene needs — gantry URDF with link meshes, link-local
robot splats with labels, background table splats, object splats and meshes,
and the GSDF binding them — into a directory. Used by tests, the acceptance
suite, and as ready-made scenes for the teleop service.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..assets.gaussians import GaussianSet
from ..assets.gsdf import (
    Camera,
    ObjectEntry,
    Plane,
    RobotEntry,
    SceneDescription,
    save_gsdf,
)
from ..assets.mesh import TriangleMesh, box_mesh, cylinder_mesh, save_mesh
from ..assets.ply import save_splat_file
from ..assets.urdf import parse_kinematic_tree
from ..geometry import RigidTransform, quat_from_matrix
from ..renderer.sh import SH_C0
from .tasks import get_task

EE_RAISED_HEIGHT = 0.46  # EE world z at slide_z = 0 (see gantry URDF)

_GANTRY_URDF = """\
<robot name="gantry">
  <link name="base">
    <visual><geometry><mesh filename="meshes/base.obj"/></geometry></visual>
  </link>
  <link name="bridge">
    <visual><geometry><mesh filename="meshes/bridge.obj"/></geometry></visual>
  </link>
  <link name="carriage">
    <visual><geometry><mesh filename="meshes/carriage.obj"/></geometry></visual>
  </link>
  <link name="wrist">
    <visual><geometry><mesh filename="meshes/wrist.obj"/></geometry></visual>
  </link>
  <link name="ee">
    <visual><geometry><mesh filename="meshes/ee.obj"/></geometry></visual>
  </link>
  <link name="finger">
    <visual><geometry><mesh filename="meshes/finger.obj"/></geometry></visual>
  </link>
  <joint name="slide_x" type="prismatic">
    <parent link="base"/><child link="bridge"/>
    <origin xyz="0 0 0.5"/><axis xyz="1 0 0"/>
    <limit lower="-0.35" upper="0.35"/>
  </joint>
  <joint name="slide_y" type="prismatic">
    <parent link="bridge"/><child link="carriage"/>
    <origin xyz="0 0 0"/><axis xyz="0 1 0"/>
    <limit lower="-0.35" upper="0.35"/>
  </joint>
  <joint name="slide_z" type="prismatic">
    <parent link="carriage"/><child link="wrist"/>
    <origin xyz="0 0 0"/><axis xyz="0 0 -1"/>
    <limit lower="0" upper="0.42"/>
  </joint>
  <joint name="wrist_ee" type="fixed">
    <parent link="wrist"/><child link="ee"/>
    <origin xyz="0 0 -0.04"/>
  </joint>
  <joint name="gripper" type="prismatic">
    <parent link="ee"/><child link="finger"/>
    <origin xyz="0 0 0"/><axis xyz="0 1 0"/>
    <limit lower="0" upper="0.04"/>
  </joint>
</robot>
"""

_LINK_MESHES: dict[str, TriangleMesh] = {
    "base": box_mesh((0.06, 0.06, 0.5), center=(-0.45, 0.0, 0.25)),
    "bridge": box_mesh((0.06, 0.9, 0.04), center=(0.0, 0.0, 0.02)),
    "carriage": box_mesh((0.08, 0.08, 0.05)),
    "wrist": box_mesh((0.03, 0.03, 0.2), center=(0.0, 0.0, 0.1)),
    "ee": box_mesh((0.05, 0.05, 0.03), center=(0.0, 0.0, 0.015)),
    "finger": box_mesh((0.01, 0.02, 0.03), center=(0.02, 0.0, 0.015)),
}

_LINK_COLORS = {
    "base": (0.35, 0.35, 0.4),
    "bridge": (0.55, 0.55, 0.6),
    "carriage": (0.8, 0.45, 0.1),
    "wrist": (0.6, 0.6, 0.65),
    "ee": (0.85, 0.15, 0.15),
    "finger": (0.9, 0.8, 0.1),
}

_TASK_OBJECTS = {
    "place_box": [
        ("bottle", cylinder_mesh(0.025, 0.12, center=(0, 0, 0.06)), (0.12, 0.45, 0.75), 0.3,
         (0.10, 0.05)),
        ("box", box_mesh((0.10, 0.10, 0.06), center=(0, 0, 0.03)), (0.65, 0.5, 0.25), 0.5,
         (-0.10, -0.08)),
    ],
    "stack_cans": [
        ("can_a", cylinder_mesh(0.03, 0.10, center=(0, 0, 0.05)), (0.75, 0.2, 0.2), 0.35,
         (0.08, 0.06)),
        ("can_b", cylinder_mesh(0.03, 0.10, center=(0, 0, 0.05)), (0.2, 0.55, 0.25), 0.35,
         (-0.09, -0.05)),
    ],
}


def dc_only_set(centroids, colors, scale=0.02, opacity_logit=2.5, rng=None,
                scale_z=None) -> GaussianSet:
    """Degree-0 splats whose DC coefficients reproduce the given colors exactly."""
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    colors = np.broadcast_to(np.asarray(colors, dtype=np.float64), (centroids.shape[0], 3))
    n = centroids.shape[0]
    rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    if rng is not None:  # mild orientation noise so covariances are exercised
        axis_angle = rng.normal(scale=0.2, size=(n, 3))
        half = np.linalg.norm(axis_angle, axis=1) / 2
        rotations = np.concatenate(
            [np.cos(half)[:, None],
             axis_angle * np.where(half > 0, np.sin(half) / np.maximum(2 * half, 1e-12), 0.5)[:, None]],
            axis=1,
        )
        rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    sz = scale if scale_z is None else scale_z
    scales_log = np.tile(np.log([scale, scale, sz]), (n, 1))
    sh = ((colors - 0.5) / SH_C0)[:, :, None]
    return GaussianSet(
        centroids=centroids,
        rotations=rotations,
        scales_log=scales_log,
        opacities_logit=np.full(n, float(opacity_logit)),
        sh_coeffs=sh,
    )


def _surface_splats(mesh: TriangleMesh, count: int, color, rng, scale=0.018) -> GaussianSet:
    from ..align.sampling import sample_surface_points

    pts = sample_surface_points(mesh, count, seed=int(rng.integers(2**31)))
    base = np.asarray(color, dtype=np.float64)
    jitter = rng.uniform(-0.05, 0.05, size=(count, 3))
    return dc_only_set(pts, np.clip(base + jitter, 0.05, 0.95), scale=scale, rng=rng)


def _table_splats(rng) -> GaussianSet:
    xs = np.linspace(-0.5, 0.5, 10)
    ys = np.linspace(-0.5, 0.5, 10)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    checker = ((gx.ravel() * 5).astype(int) + (gy.ravel() * 5).astype(int)) % 2
    colors = np.where(checker[:, None], [0.42, 0.4, 0.38], [0.5, 0.48, 0.45])
    colors = np.clip(colors + rng.uniform(-0.02, 0.02, size=colors.shape), 0, 1)
    return dc_only_set(pts, colors, scale=0.075, scale_z=0.004, opacity_logit=3.0)


def _lookat_w2c(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    eye = np.asarray(eye, float)
    f = np.asarray(target, float) - eye
    f /= np.linalg.norm(f)
    r = np.cross(f, np.asarray(up, float))
    r /= np.linalg.norm(r)
    d = np.cross(f, r)  # image-down axis
    cam_to_world = np.column_stack([r, d, f])
    w2c_rot = cam_to_world.T
    return RigidTransform(quat_from_matrix(w2c_rot), -w2c_rot @ eye)


def write_toy_scene(
    out_dir,
    task_name: str = "place_box",
    seed: int = 0,
    splats_per_link: int = 18,
    splats_per_object: int = 24,
    image_size: int = 64,
) -> Path:
    """Generate a complete scene for a shipped task; returns the GSDF path."""
    if task_name not in _TASK_OBJECTS:
        raise KeyError(f"no toy scene for task '{task_name}'")
    task = get_task(task_name)
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "meshes").mkdir(parents=True, exist_ok=True)
    (out / "splats").mkdir(parents=True, exist_ok=True)

    (out / "robot.urdf").write_text(_GANTRY_URDF, encoding="utf-8")
    for name, mesh in _LINK_MESHES.items():
        save_mesh(out / "meshes" / f"{name}.obj", mesh)

    tree = parse_kinematic_tree(_GANTRY_URDF)
    link_sets, labels = [], []
    for index, link in enumerate(tree.links):
        part = _surface_splats(_LINK_MESHES[link.name], splats_per_link,
                               _LINK_COLORS[link.name], rng)
        link_sets.append(part)
        labels.append(np.full(part.count, index, dtype=np.int64))
    # A little scan residue that never moves (world frame, label -1).
    residue = dc_only_set(
        np.array([[-0.45, 0.12, 0.02], [-0.48, -0.1, 0.05], [-0.42, 0.0, 0.55]]),
        (0.3, 0.3, 0.33), scale=0.03,
    )
    link_sets.append(residue)
    labels.append(np.full(residue.count, -1, dtype=np.int64))

    from ..assets.gaussians import concatenate_sets

    robot_splats = concatenate_sets(link_sets)
    save_splat_file(out / "splats" / "robot.ply", robot_splats)
    link_labels = np.concatenate(labels)

    save_splat_file(out / "splats" / "background.ply", _table_splats(rng))

    objects = []
    for name, mesh, color, mass, pos in _TASK_OBJECTS[task_name]:
        save_mesh(out / "meshes" / f"{name}.obj", mesh)
        save_splat_file(out / "splats" / f"{name}.ply",
                        _surface_splats(mesh, splats_per_object, color, rng, scale=0.012))
        objects.append(
            ObjectEntry(
                name=name,
                splats=f"splats/{name}.ply",
                mesh=f"meshes/{name}.obj",
                transform=RigidTransform(translation=(pos[0], pos[1], 0.0)),
                mass_kg=mass,
            )
        )

    cameras = [
        Camera(
            name="front",
            width=image_size, height=image_size,
            fx=1.1 * image_size, fy=1.1 * image_size,
            cx=(image_size - 1) / 2, cy=(image_size - 1) / 2,
            world_to_camera=_lookat_w2c((0.0, -0.85, 0.6), (0.0, 0.0, 0.1)),
            near=0.05, far=5.0,
        ),
        Camera(
            name="wrist",
            width=48, height=48,
            fx=40.0, fy=40.0, cx=23.5, cy=23.5,
            world_to_camera=RigidTransform.identity(),  # recomputed from FK
            near=0.01, far=3.0,
            mount_link="ee",
            mount_offset=RigidTransform(np.array([0.0, 1.0, 0.0, 0.0]), (0.0, 0.0, -0.02)),
        ),
    ]

    scene = SceneDescription(
        metric_scale=1.0,
        background="splats/background.ply",
        support_plane=Plane(point=np.zeros(3), normal=np.array([0.0, 0.0, 1.0])),
        gravity_dir=np.array([0.0, 0.0, -1.0]),
        robots=[
            RobotEntry(
                name="gantry",
                tree="robot.urdf",
                splats="splats/robot.ply",
                base_transform=RigidTransform.identity(),
                link_labels=link_labels,
                captured_q=task.home_q,
            )
        ],
        objects=objects,
        cameras=cameras,
    )
    gsdf_path = out / f"{task_name}.gsdf"
    save_gsdf(gsdf_path, scene)
    return gsdf_path
