"""Metric scale and support-plane recovery from a printed square marker.

The marker's four corners arrive as already-triangulated 3D points in the
reconstruction frame (a sidecar file; image-space detection is out of scope).
The known physical edge length fixes the metric scale; the corner plane gives
the tabletop and, oriented away from the scene, the gravity direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assets.gsdf import Plane


class MarkerError(ValueError):
    pass


@dataclass(frozen=True)
class MarkerObservation:
    corner_points: np.ndarray  # (4, 3), ordered around the square, recon units
    edge_length_m: float

    def __post_init__(self):
        pts = np.asarray(self.corner_points, dtype=np.float64).reshape(4, 3)
        object.__setattr__(self, "corner_points", pts)
        if self.edge_length_m <= 0:
            raise MarkerError("edge_length_m must be positive")
        if len({tuple(p) for p in pts}) != 4:
            raise MarkerError("marker corners must be 4 distinct points")
        edges = self.edge_lengths()
        for i in range(4):
            a, b = edges[i], edges[(i + 1) % 4]
            if min(a, b) < 0.8 * max(a, b):
                raise MarkerError(
                    f"consecutive marker edges differ by more than 20% ({a:.4g} vs {b:.4g})"
                )

    def edge_lengths(self) -> np.ndarray:
        p = self.corner_points
        return np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)


@dataclass(frozen=True)
class ScaleEstimate:
    scale: float
    support_plane: Plane  # in metric (scaled) coordinates
    gravity_dir: np.ndarray  # unit, metric frame


def estimate_scale(marker: MarkerObservation, scene_centroid) -> ScaleEstimate:
    """Scale factor plus tabletop plane and gravity.

    scene_centroid: centroid of the splat cloud in the same reconstruction
    frame as the corners; the plane normal is oriented away from it (the
    scene sits above the table, gravity points through it).
    """
    scale = float(marker.edge_length_m / marker.edge_lengths().mean())

    corners = marker.corner_points * scale
    center = corners.mean(axis=0)
    centered = corners - center
    _, svals, vt = np.linalg.svd(centered)
    if svals[1] < 1e-12 * max(svals[0], 1.0):
        raise MarkerError("degenerate marker: corners are collinear")
    normal = vt[2]

    centroid = np.asarray(scene_centroid, dtype=np.float64) * scale
    if normal @ (centroid - center) > 0:
        normal = -normal

    return ScaleEstimate(
        scale=scale,
        support_plane=Plane(point=center, normal=-normal),
        gravity_dir=normal,
    )


def parse_marker_file(text: str) -> MarkerObservation:
    """Sidecar format: 4 lines 'x y z', then one line 'edge_length_m v'."""
    lines = [l for l in (s.strip() for s in text.splitlines()) if l and not l.startswith("#")]
    if len(lines) != 5:
        raise MarkerError(f"marker file needs 4 corner lines + edge line, got {len(lines)}")
    corners = []
    for line in lines[:4]:
        vals = line.split()
        if len(vals) != 3:
            raise MarkerError(f"bad corner line: '{line}'")
        corners.append([float(v) for v in vals])
    key, *rest = lines[4].split()
    if key != "edge_length_m" or len(rest) != 1:
        raise MarkerError(f"bad edge line: '{lines[4]}'")
    return MarkerObservation(np.asarray(corners), float(rest[0]))


def load_marker_file(path) -> MarkerObservation:
    with open(path, "r", encoding="utf-8") as f:
        return parse_marker_file(f.read())
