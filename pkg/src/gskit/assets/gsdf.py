"""GSDF scene descriptions: the document binding splats, robots, and objects.

A GSDF file is YAML with top-level keys gsdf_version, metric_scale,
background, robots, objects, support_plane, gravity_dir, cameras, and a
reserved opaque `materials` map. Relative file references resolve against the
document's directory.

Conventions baked into the schema:
  * Every splat file referenced by a scene is already in metric scene
    coordinates; `metric_scale` records the factor the scale-alignment step
    applied to the raw reconstruction.
  * Robot splats labeled with a link index are stored in that link's local
    frame; splats labeled -1 never move and stay in the world frame.
  * Object splats/meshes are in the object's asset frame; `transform` places
    the asset at its captured scene pose, and the environment composes the
    per-step pose on top of it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..geometry import RigidTransform

GSDF_VERSION = 1


class GsdfError(ValueError):
    """Schema-level failure; carries every violation found, not just the first."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Camera:
    name: str
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: RigidTransform
    near: float
    far: float
    # Wrist cameras: rigidly mounted to a robot link with a fixed offset.
    mount_robot: str | None = None
    mount_link: str | None = None
    mount_offset: RigidTransform | None = None

    def center(self) -> np.ndarray:
        """Camera origin in world coordinates."""
        return self.world_to_camera.inverse().translation

    def with_pose(self, world_to_camera: RigidTransform) -> "Camera":
        return Camera(
            self.name, self.width, self.height, self.fx, self.fy, self.cx, self.cy,
            world_to_camera, self.near, self.far,
            self.mount_robot, self.mount_link, self.mount_offset,
        )


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray  # unit

    def height_of(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.point) @ self.normal

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Two orthonormal in-plane axes (deterministic)."""
        n = self.normal
        seed = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
        u = seed - n * (seed @ n)
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)


@dataclass
class RobotEntry:
    name: str
    tree: str  # URDF reference
    splats: str  # splat-file reference
    base_transform: RigidTransform
    link_labels: np.ndarray | None = None  # per-splat link index, -1 = static
    captured_q: np.ndarray | None = None  # joint pose saved during the scan


@dataclass
class ObjectEntry:
    name: str
    splats: str
    mesh: str
    transform: RigidTransform  # asset frame -> captured scene pose
    mass_kg: float


@dataclass
class SceneDescription:
    metric_scale: float
    background: str
    support_plane: Plane
    gravity_dir: np.ndarray
    robots: list[RobotEntry] = field(default_factory=list)
    objects: list[ObjectEntry] = field(default_factory=list)
    cameras: list[Camera] = field(default_factory=list)
    materials: dict = field(default_factory=dict)  # reserved, unread
    base_dir: Path | None = None

    def camera(self, name: str) -> Camera:
        for c in self.cameras:
            if c.name == name:
                return c
        raise KeyError(f"unknown camera '{name}'")

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        if p.is_absolute() or self.base_dir is None:
            return p
        return self.base_dir / p


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    def add(self, msg: str) -> None:
        self.problems.append(msg)

    @property
    def ok(self) -> bool:
        return not self.problems


def _as_unit(vec, name, problems, tol=1e-6):
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    if v.shape != (3,):
        problems.append(f"{name} must be a 3-vector")
        return np.array([0.0, 0.0, 1.0])
    n = np.linalg.norm(v)
    if abs(n - 1.0) > tol:
        problems.append(f"{name} must be unit length (norm {n:.6g})")
        return v / n if n > 0 else np.array([0.0, 0.0, 1.0])
    return v / n


def _transform_from(d, name, problems) -> RigidTransform:
    try:
        return RigidTransform.from_dict(d)
    except Exception as e:  # noqa: BLE001 - schema errors are collected
        problems.append(f"{name}: bad transform ({e})")
        return RigidTransform.identity()


def parse_gsdf(text: str, base_dir=None) -> SceneDescription:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise GsdfError([f"not valid YAML: {e}"]) from e
    if not isinstance(doc, dict):
        raise GsdfError(["document root must be a mapping"])

    problems: list[str] = []
    if doc.get("gsdf_version") != GSDF_VERSION:
        problems.append(f"gsdf_version must be {GSDF_VERSION}, got {doc.get('gsdf_version')!r}")

    for key in ("metric_scale", "background", "support_plane", "gravity_dir", "cameras"):
        if key not in doc:
            problems.append(f"missing required key '{key}'")
    known = {
        "gsdf_version", "metric_scale", "background", "robots", "objects",
        "support_plane", "gravity_dir", "cameras", "materials",
    }
    for key in doc:
        if key not in known:
            problems.append(f"unknown top-level key '{key}'")

    metric_scale = float(doc.get("metric_scale", 1.0) or 0.0)
    if metric_scale <= 0:
        problems.append(f"metric_scale must be positive, got {metric_scale}")

    sp = doc.get("support_plane") or {}
    plane = Plane(
        point=np.asarray(sp.get("point", [0, 0, 0]), dtype=np.float64),
        normal=_as_unit(sp.get("normal", [0, 0, 1]), "support_plane.normal", problems),
    )
    gravity = _as_unit(doc.get("gravity_dir", [0, 0, -1]), "gravity_dir", problems)

    robots: list[RobotEntry] = []
    for i, r in enumerate(doc.get("robots") or []):
        name = r.get("name", f"robot{i}")
        for key in ("tree", "splats"):
            if key not in r:
                problems.append(f"robot '{name}' missing '{key}'")
        labels = r.get("link_labels")
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.ndim != 1:
                problems.append(f"robot '{name}': link_labels must be a flat list")
            elif labels.size and labels.min() < -1:
                problems.append(f"robot '{name}': link_labels below -1")
        q = r.get("captured_q")
        robots.append(
            RobotEntry(
                name=name,
                tree=str(r.get("tree", "")),
                splats=str(r.get("splats", "")),
                base_transform=_transform_from(
                    r.get("base_transform", RigidTransform.identity().as_dict()),
                    f"robot '{name}' base_transform", problems),
                link_labels=labels,
                captured_q=None if q is None else np.asarray(q, dtype=np.float64),
            )
        )

    objects: list[ObjectEntry] = []
    for i, o in enumerate(doc.get("objects") or []):
        name = o.get("name", f"object{i}")
        for key in ("splats", "mesh", "mass_kg"):
            if key not in o:
                problems.append(f"object '{name}' missing '{key}'")
        mass = float(o.get("mass_kg", 0.0) or 0.0)
        if mass <= 0:
            problems.append(f"object '{name}': mass_kg must be positive, got {mass}")
        objects.append(
            ObjectEntry(
                name=name,
                splats=str(o.get("splats", "")),
                mesh=str(o.get("mesh", "")),
                transform=_transform_from(
                    o.get("transform", RigidTransform.identity().as_dict()),
                    f"object '{name}' transform", problems),
                mass_kg=mass,
            )
        )

    cameras: list[Camera] = []
    for i, c in enumerate(doc.get("cameras") or []):
        name = c.get("name", f"camera{i}")
        w, h = int(c.get("width", 0)), int(c.get("height", 0))
        fx, fy = float(c.get("fx", 0)), float(c.get("fy", 0))
        near, far = float(c.get("near", 0)), float(c.get("far", 0))
        if w < 1 or h < 1:
            problems.append(f"camera '{name}': width/height must be >= 1")
        if fx <= 0 or fy <= 0:
            problems.append(f"camera '{name}': fx, fy must be positive")
        if not (0 < near < far):
            problems.append(f"camera '{name}': requires 0 < near < far")
        mount = c.get("mount") or {}
        cameras.append(
            Camera(
                name=name, width=max(w, 1), height=max(h, 1),
                fx=fx, fy=fy, cx=float(c.get("cx", w / 2)), cy=float(c.get("cy", h / 2)),
                world_to_camera=_transform_from(
                    c.get("world_to_camera", RigidTransform.identity().as_dict()),
                    f"camera '{name}' world_to_camera", problems),
                near=near, far=far,
                mount_robot=mount.get("robot"),
                mount_link=mount.get("link"),
                mount_offset=(
                    _transform_from(mount["offset"], f"camera '{name}' mount offset", problems)
                    if "offset" in mount else (RigidTransform.identity() if mount else None)
                ),
            )
        )

    scene = SceneDescription(
        metric_scale=metric_scale,
        background=str(doc.get("background", "")),
        support_plane=plane,
        gravity_dir=gravity,
        robots=robots,
        objects=objects,
        cameras=cameras,
        materials=doc.get("materials") or {},
        base_dir=None if base_dir is None else Path(base_dir),
    )

    # Label range checks need the referenced trees; only possible with a base dir.
    if base_dir is not None:
        from .urdf import load_kinematic_tree

        for r in scene.robots:
            if r.link_labels is None:
                continue
            tree_path = scene.resolve(r.tree)
            if not tree_path.exists():
                continue  # unresolved references are validate_scene's job
            try:
                n_links = len(load_kinematic_tree(tree_path).links)
            except Exception:
                continue
            if r.link_labels.size and r.link_labels.max() >= n_links:
                problems.append(
                    f"robot '{r.name}': label out of range "
                    f"(max {int(r.link_labels.max())} >= {n_links} links)"
                )

    if problems:
        raise GsdfError(problems)
    return scene


def write_gsdf(scene: SceneDescription) -> str:
    doc: dict = {
        "gsdf_version": GSDF_VERSION,
        "metric_scale": float(scene.metric_scale),
        "background": scene.background,
        "support_plane": {
            "point": [float(v) for v in scene.support_plane.point],
            "normal": [float(v) for v in scene.support_plane.normal],
        },
        "gravity_dir": [float(v) for v in scene.gravity_dir],
        "robots": [
            {
                "name": r.name,
                "tree": r.tree,
                "splats": r.splats,
                "base_transform": r.base_transform.as_dict(),
                **({"link_labels": [int(v) for v in r.link_labels]} if r.link_labels is not None else {}),
                **({"captured_q": [float(v) for v in r.captured_q]} if r.captured_q is not None else {}),
            }
            for r in scene.robots
        ],
        "objects": [
            {
                "name": o.name,
                "splats": o.splats,
                "mesh": o.mesh,
                "transform": o.transform.as_dict(),
                "mass_kg": float(o.mass_kg),
            }
            for o in scene.objects
        ],
        "cameras": [
            {
                "name": c.name,
                "width": c.width, "height": c.height,
                "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
                "world_to_camera": c.world_to_camera.as_dict(),
                "near": c.near, "far": c.far,
                **(
                    {"mount": {
                        **({"robot": c.mount_robot} if c.mount_robot else {}),
                        "link": c.mount_link,
                        "offset": (c.mount_offset or RigidTransform.identity()).as_dict(),
                    }}
                    if c.mount_link else {}
                ),
            }
            for c in scene.cameras
        ],
    }
    if scene.materials:
        doc["materials"] = scene.materials
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def validate_scene(scene: SceneDescription, asset_root=None) -> ValidationReport:
    """Collect every violated invariant and unresolvable reference."""
    from .ply import load_splat_file
    from .urdf import load_kinematic_tree

    report = ValidationReport()
    root = Path(asset_root) if asset_root is not None else scene.base_dir

    def resolve(ref: str) -> Path | None:
        if not ref:
            report.add("empty file reference")
            return None
        p = Path(ref)
        if not p.is_absolute() and root is not None:
            p = root / p
        if not p.exists():
            report.add(f"missing file: {p}")
            return None
        return p

    if scene.metric_scale <= 0:
        report.add(f"metric_scale must be positive, got {scene.metric_scale}")
    if abs(np.linalg.norm(scene.gravity_dir) - 1.0) > 1e-6:
        report.add("gravity_dir is not unit length")
    if abs(np.linalg.norm(scene.support_plane.normal) - 1.0) > 1e-6:
        report.add("support_plane normal is not unit length")

    resolve(scene.background)

    for r in scene.robots:
        tree_path = resolve(r.tree)
        splat_path = resolve(r.splats)
        n_links = None
        if tree_path is not None:
            try:
                n_links = len(load_kinematic_tree(tree_path).links)
            except Exception as e:
                report.add(f"robot '{r.name}': unreadable tree ({e})")
        if r.link_labels is not None:
            if n_links is not None and r.link_labels.size and r.link_labels.max() >= n_links:
                report.add(f"robot '{r.name}': label out of range")
            if r.link_labels.size and r.link_labels.min() < -1:
                report.add(f"robot '{r.name}': label below -1")
            if splat_path is not None:
                try:
                    count = load_splat_file(splat_path).count
                    if count != r.link_labels.shape[0]:
                        report.add(
                            f"robot '{r.name}': {r.link_labels.shape[0]} labels for {count} splats"
                        )
                except Exception as e:
                    report.add(f"robot '{r.name}': unreadable splats ({e})")

    for o in scene.objects:
        resolve(o.splats)
        resolve(o.mesh)
        if o.mass_kg <= 0:
            report.add(f"object '{o.name}': mass_kg must be positive, got {o.mass_kg}")

    names = [c.name for c in scene.cameras]
    if len(set(names)) != len(names):
        report.add("duplicate camera names")
    robot_names = {r.name for r in scene.robots}
    for c in scene.cameras:
        if c.mount_link is not None:
            if scene.robots and c.mount_robot is not None and c.mount_robot not in robot_names:
                report.add(f"camera '{c.name}': mount references unknown robot '{c.mount_robot}'")
            if not scene.robots:
                report.add(f"camera '{c.name}': mount declared but scene has no robots")

    return report


def load_gsdf(path) -> SceneDescription:
    path = Path(path)
    return parse_gsdf(path.read_text(encoding="utf-8"), base_dir=path.parent)


def save_gsdf(path, scene: SceneDescription) -> None:
    Path(path).write_text(write_gsdf(scene), encoding="utf-8")


def scene_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
