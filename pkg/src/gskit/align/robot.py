"""Robot-to-scene alignment: pose the URDF at its scan-time joint configuration,
densify its link surfaces into a point cloud, and ICP that cloud onto the
splat centroids."""

from __future__ import annotations

import numpy as np

from ..assets.gaussians import GaussianSet
from ..assets.mesh import TriangleMesh, load_mesh
from ..assets.urdf import KinematicTree
from ..geometry import RigidTransform
from ..kinematics import forward_kinematics
from .icp import AlignmentResult, IcpError, IcpParams, icp_align
from .sampling import sample_surface_points

DEFAULT_SURFACE_POINTS = 200_000
OPACITY_FLOOR = 0.3  # activated-opacity threshold for alignment clouds


def splat_alignment_cloud(gset: GaussianSet, opacity_floor: float = OPACITY_FLOOR) -> np.ndarray:
    """Splat centroids with low-opacity floaters dropped."""
    activated = 1.0 / (1.0 + np.exp(-gset.opacities_logit))
    return gset.centroids[activated > opacity_floor]


def link_surface_clouds(
    tree: KinematicTree,
    q_captured: np.ndarray,
    mesh_loader=None,
    total_points: int = DEFAULT_SURFACE_POINTS,
    seed: int = 0,
    base: RigidTransform | None = None,
) -> list[np.ndarray]:
    """Per-link sampled surface clouds posed by base ∘ FK(q_captured),
    area-proportional across links. Links without a visual mesh get an empty
    cloud. mesh_loader maps a link's visual-mesh reference to a TriangleMesh."""
    loader = mesh_loader or load_mesh
    base = base or RigidTransform.identity()
    poses = forward_kinematics(tree, q_captured)

    meshes: list[tuple[int, TriangleMesh, RigidTransform]] = []
    for index, link in enumerate(tree.links):
        if link.visual_mesh is None:
            continue
        mesh = loader(link.visual_mesh)
        meshes.append((index, mesh, base @ poses[link.name] @ link.visual_origin))
    if not meshes:
        raise ValueError("tree has no links with visual meshes")

    areas = np.array([m.triangle_areas().sum() for _, m, _ in meshes])
    counts = np.floor(total_points * areas / areas.sum()).astype(int)
    counts[: total_points - counts.sum()] += 1  # exact total

    clouds: list[np.ndarray] = [np.zeros((0, 3)) for _ in tree.links]
    for i, (index, mesh, pose) in enumerate(meshes):
        if counts[i] == 0:
            continue
        pts = sample_surface_points(mesh, int(counts[i]), seed=seed + index)
        clouds[index] = pose.apply(pts)
    return clouds


def robot_surface_cloud(
    tree: KinematicTree,
    q_captured: np.ndarray,
    mesh_loader=None,
    total_points: int = DEFAULT_SURFACE_POINTS,
    seed: int = 0,
) -> np.ndarray:
    """All link surfaces merged into one world cloud (see link_surface_clouds)."""
    clouds = link_surface_clouds(tree, q_captured, mesh_loader, total_points, seed)
    return np.concatenate([c for c in clouds if c.shape[0]])


def align_robot(
    scene_splats: GaussianSet,
    tree: KinematicTree,
    q_captured: np.ndarray,
    init: RigidTransform | None = None,
    mesh_loader=None,
    total_points: int = DEFAULT_SURFACE_POINTS,
    params: IcpParams | None = None,
    opacity_floor: float = OPACITY_FLOOR,
    seed: int = 0,
) -> AlignmentResult:
    """Recover the rigid transform placing the simulated robot in the scene."""
    target = splat_alignment_cloud(scene_splats, opacity_floor)
    if target.shape[0] == 0:
        raise IcpError("splat cloud is empty after opacity filtering")
    source = robot_surface_cloud(tree, q_captured, mesh_loader, total_points, seed)
    return icp_align(source, target, init=init, params=params)
