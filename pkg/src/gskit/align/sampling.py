"""Uniform surface sampling of triangle meshes (area-weighted, seeded)."""

from __future__ import annotations

import numpy as np

from ..assets.mesh import TriangleMesh


def sample_surface_points(mesh: TriangleMesh, target_count: int, seed: int = 0) -> np.ndarray:
    """Exactly target_count points, uniform by triangle area, deterministic per seed."""
    if mesh.triangle_count < 1:
        raise ValueError("mesh has no triangles")
    if target_count < 0:
        raise ValueError("target_count must be non-negative")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero total area")

    rng = np.random.default_rng(seed)
    tri = rng.choice(mesh.triangle_count, size=target_count, p=areas / total)
    u = rng.random(target_count)
    v = rng.random(target_count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]

    a = mesh.vertices[mesh.faces[tri, 0]]
    b = mesh.vertices[mesh.faces[tri, 1]]
    c = mesh.vertices[mesh.faces[tri, 2]]
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)
