"""URDF-subset parser: revolute/prismatic/fixed joints on a single rooted tree.

Unsupported constructs (mimic joints, transmissions, continuous joints) are
rejected rather than coerced. Joints are reordered root-first so forward
kinematics can run as a single pass.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from ..geometry import RigidTransform, rpy_to_quat

JOINT_TYPES = ("revolute", "prismatic", "fixed")


class UrdfError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    name: str
    visual_mesh: str | None = None
    collision_mesh: str | None = None
    visual_origin: RigidTransform = field(default_factory=RigidTransform.identity)


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str
    child: str
    joint_type: str
    origin: RigidTransform
    axis: np.ndarray | None
    limits: tuple[float, float] | None


@dataclass(frozen=True)
class KinematicTree:
    links: list[Link]
    joints: list[Joint]  # topological, root-first
    root: str

    def link(self, name: str) -> Link:
        for l in self.links:
            if l.name == name:
                return l
        raise KeyError(name)

    @property
    def link_names(self) -> list[str]:
        return [l.name for l in self.links]

    @property
    def actuated_joints(self) -> list[Joint]:
        return [j for j in self.joints if j.joint_type != "fixed"]

    @property
    def dof(self) -> int:
        return len(self.actuated_joints)

    def joint_limits(self) -> np.ndarray:
        return np.array([j.limits for j in self.actuated_joints], dtype=np.float64).reshape(-1, 2)


def _parse_vec(text: str | None, default: str, n: int = 3) -> np.ndarray:
    vals = [float(v) for v in (text or default).split()]
    if len(vals) != n:
        raise UrdfError(f"expected {n} values, got '{text}'")
    return np.asarray(vals, dtype=np.float64)


def _parse_origin(el: ET.Element | None) -> RigidTransform:
    if el is None:
        return RigidTransform.identity()
    xyz = _parse_vec(el.get("xyz"), "0 0 0")
    rpy = _parse_vec(el.get("rpy"), "0 0 0")
    return RigidTransform(rpy_to_quat(*rpy), xyz)


def _mesh_filename(link_el: ET.Element, tag: str) -> str | None:
    geom = link_el.find(f"{tag}/geometry/mesh")
    return None if geom is None else geom.get("filename")


def parse_kinematic_tree(text: str) -> KinematicTree:
    try:
        root_el = ET.fromstring(text)
    except ET.ParseError as e:
        raise UrdfError(f"not well-formed XML: {e}") from e
    if root_el.tag != "robot":
        raise UrdfError(f"expected <robot> root element, got <{root_el.tag}>")

    links: list[Link] = []
    for el in root_el.findall("link"):
        name = el.get("name")
        if not name:
            raise UrdfError("link without a name")
        links.append(
            Link(
                name=name,
                visual_mesh=_mesh_filename(el, "visual"),
                collision_mesh=_mesh_filename(el, "collision"),
                visual_origin=_parse_origin(el.find("visual/origin")),
            )
        )
    names = [l.name for l in links]
    if len(set(names)) != len(names):
        raise UrdfError("duplicate link names")
    if not links:
        raise UrdfError("no links declared")

    joints: list[Joint] = []
    for el in root_el.findall("joint"):
        jname = el.get("name") or f"joint{len(joints)}"
        jtype = el.get("type")
        if jtype not in JOINT_TYPES:
            raise UrdfError(f"unsupported joint type '{jtype}' on joint {jname}")
        if el.find("mimic") is not None:
            raise UrdfError(f"mimic joints not supported (joint {jname})")
        parent_el, child_el = el.find("parent"), el.find("child")
        if parent_el is None or child_el is None:
            raise UrdfError(f"joint {jname} missing parent or child")
        parent, child = parent_el.get("link"), child_el.get("link")
        if parent not in names or child not in names:
            raise UrdfError(f"joint {jname} references unknown link")

        axis = None
        limits = None
        if jtype != "fixed":
            axis_el = el.find("axis")
            if axis_el is None:
                raise UrdfError(f"missing axis on non-fixed joint {jname}")
            axis = _parse_vec(axis_el.get("xyz"), "1 0 0")
            norm = np.linalg.norm(axis)
            if norm == 0:
                raise UrdfError(f"zero axis on joint {jname}")
            axis = axis / norm
            limit_el = el.find("limit")
            if limit_el is None:
                raise UrdfError(f"missing limit on non-fixed joint {jname}")
            lo = float(limit_el.get("lower", "0"))
            hi = float(limit_el.get("upper", "0"))
            if lo > hi:
                raise UrdfError(f"limit inversion on joint {jname}: [{lo}, {hi}]")
            limits = (lo, hi)

        joints.append(Joint(jname, parent, child, jtype, _parse_origin(el.find("origin")), axis, limits))

    children = {j.child for j in joints}
    if len(children) != len(joints):
        raise UrdfError("a link has multiple parent joints")
    roots = [n for n in names if n not in children]
    if len(roots) > 1:
        raise UrdfError(f"multiple roots: {roots}")
    if not roots:
        raise UrdfError("cycle detected: no root link")
    root = roots[0]

    # Root-first reorder; anything unreachable from the root is a cycle.
    by_parent: dict[str, list[Joint]] = {}
    for j in joints:
        by_parent.setdefault(j.parent, []).append(j)
    ordered: list[Joint] = []
    frontier = [root]
    while frontier:
        link = frontier.pop(0)
        for j in by_parent.get(link, []):
            ordered.append(j)
            frontier.append(j.child)
    if len(ordered) != len(joints):
        raise UrdfError("cycle detected: joints unreachable from root")

    return KinematicTree(links=links, joints=ordered, root=root)


def load_kinematic_tree(path) -> KinematicTree:
    with open(path, "r", encoding="utf-8") as f:
        return parse_kinematic_tree(f.read())
