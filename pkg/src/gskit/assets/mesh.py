"""Triangle-soup meshes, read and written as minimal Wavefront OBJ.

Only `v` and `f` records are honored; faces with more than three vertices are
fan-triangulated. This is intentionally the smallest mesh surface the kit
needs for URDF visuals and object collision geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int

    @property
    def triangle_count(self) -> int:
        return self.faces.shape[0]

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def parse_obj(text: str) -> TriangleMesh:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            if len(idx) < 3:
                raise MeshError(f"line {lineno}: face needs at least 3 vertices")
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
        # all other records (vn, vt, usemtl, o, g, s, ...) are ignored
    if not faces:
        raise MeshError("mesh has no triangles")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.min() < 0 or f.max() >= len(v):
        raise MeshError("face index out of range")
    return TriangleMesh(v, f)


def write_obj(mesh: TriangleMesh) -> str:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


def load_mesh(path) -> TriangleMesh:
    with open(path, "r", encoding="utf-8") as f:
        return parse_obj(f.read())


def save_mesh(path, mesh: TriangleMesh) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_obj(mesh))


def box_mesh(size, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box; size is a scalar or per-axis triple."""
    s = np.broadcast_to(np.asarray(size, dtype=np.float64), (3,)) / 2.0
    c = np.asarray(center, dtype=np.float64)
    corners = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
    )
    verts = corners * s + c
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # -x
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 4, 5], [0, 5, 1],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 2, 6], [0, 6, 4],  # -z
            [1, 5, 7], [1, 7, 3],  # +z
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, faces)


def cylinder_mesh(radius: float, height: float, segments: int = 12, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed cylinder along +z with base at z=center_z - h/2."""
    c = np.asarray(center, dtype=np.float64)
    ang = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    lo = np.concatenate([ring, np.full((segments, 1), -height / 2)], axis=1) + c
    hi = np.concatenate([ring, np.full((segments, 1), height / 2)], axis=1) + c
    verts = np.concatenate([lo, hi, [c + [0, 0, -height / 2]], [c + [0, 0, height / 2]]])
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [[i, j, segments + i], [j, segments + j, segments + i]]
        faces += [[2 * segments, j, i], [2 * segments + 1, segments + i, segments + j]]
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))
