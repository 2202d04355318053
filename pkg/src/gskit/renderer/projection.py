"""Perspective projection of 3D Gaussians to screen-space splats.

The 2D covariance is J W Σ Wᵀ Jᵀ with J the perspective Jacobian, followed by
a +0.3 px² low-pass dilation. Splats behind the near plane, beyond the far
plane, or more than 3σ outside the image rectangle are culled. View-dependent
color is evaluated here, once per splat, at the direction from the camera
center back-rotated into the frame the SH coefficients are stored in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assets.gaussians import GaussianSet
from ..assets.gsdf import Camera
from ..geometry import quat_conj, quat_to_matrix
from .sh import evaluate_sh

COV2D_DILATION = 0.3  # px^2 low-pass, matches the assets' training constant


@dataclass(frozen=True)
class Splat2D:
    mean2d: np.ndarray  # pixel coordinates (x, y)
    cov2d: np.ndarray  # 2x2, post-dilation
    depth: float  # camera-space z, meters
    color: np.ndarray  # RGB in [0, 1]
    alpha_base: float  # activated opacity
    feature: np.ndarray | None = None


@dataclass
class ProjectedSplats:
    """Screen-space splat arrays in concatenation order (culled rows removed)."""

    mean2d: np.ndarray  # (M, 2) float32
    conic: np.ndarray  # (M, 3) float32: inverse covariance (a, b, c)
    extent: np.ndarray  # (M, 2) float32: 3σ half-widths (rx, ry)
    depth: np.ndarray  # (M,) float32
    color: np.ndarray  # (M, 3) float32
    alpha_base: np.ndarray  # (M,) float32
    cov2d: np.ndarray  # (M, 2, 2) float64, post-dilation
    feature: np.ndarray | None  # (M, d) float32
    source_index: np.ndarray  # (M,) original global splat index

    @property
    def count(self) -> int:
        return self.mean2d.shape[0]


def _batch_rotmats(quats: np.ndarray) -> np.ndarray:
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    m = np.empty((quats.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def world_covariances(gset: GaussianSet) -> np.ndarray:
    """Σ = R S Sᵀ Rᵀ for every splat, (N, 3, 3)."""
    rot = _batch_rotmats(gset.rotations)
    scales = np.exp(gset.scales_log)
    m = rot * scales[:, None, :]
    return m @ m.transpose(0, 2, 1)


def project_sets(sets: list[GaussianSet], camera: Camera) -> ProjectedSplats:
    means, conics, extents, depths, colors, alphas, covs, feats, idx = (
        [], [], [], [], [], [], [], [], [],
    )
    want_features = all(s.features is not None for s in sets) and any(s.count for s in sets)

    w2c = camera.world_to_camera
    rot_w2c = w2c.rotation_matrix()
    cam_center = camera.center()

    offset = 0
    for gset in sets:
        n = gset.count
        if n == 0:
            continue
        gset.validate()

        cam_pts = gset.centroids @ rot_w2c.T + w2c.translation
        tz = cam_pts[:, 2]
        keep = (tz > camera.near) & (tz < camera.far)

        tx, ty = cam_pts[:, 0], cam_pts[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = camera.fx * tx / tz + camera.cx
            v = camera.fy * ty / tz + camera.cy

        sigma = world_covariances(gset)
        # J rows: d(u,v)/d(camera point); build T = J @ W once per splat.
        zinv = np.where(keep, 1.0 / np.where(tz == 0, 1.0, tz), 0.0)
        j = np.zeros((n, 2, 3))
        j[:, 0, 0] = camera.fx * zinv
        j[:, 0, 2] = -camera.fx * tx * zinv * zinv
        j[:, 1, 1] = camera.fy * zinv
        j[:, 1, 2] = -camera.fy * ty * zinv * zinv
        t_mat = j @ rot_w2c
        cov2d = t_mat @ sigma @ t_mat.transpose(0, 2, 1)
        cov2d[:, 0, 0] += COV2D_DILATION
        cov2d[:, 1, 1] += COV2D_DILATION

        a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
        det = a * c - b * b
        keep &= det > 0

        mid = 0.5 * (a + c)
        lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
        radius = 3.0 * np.sqrt(np.maximum(lam_max, 0.0))
        keep &= (u + radius >= 0) & (u - radius <= camera.width - 1)
        keep &= (v + radius >= 0) & (v - radius <= camera.height - 1)

        if not keep.any():
            offset += n
            continue

        sel = np.flatnonzero(keep)
        inv_det = 1.0 / det[sel]
        conic = np.stack([c[sel] * inv_det, -b[sel] * inv_det, a[sel] * inv_det], axis=1)
        extent = np.stack([3.0 * np.sqrt(a[sel]), 3.0 * np.sqrt(c[sel])], axis=1)

        view_dir = gset.centroids[sel] - cam_center
        view_dir /= np.linalg.norm(view_dir, axis=1, keepdims=True)
        if gset.sh_frame_rotation is not None:
            # Coefficients live in the pre-transform frame: back-rotate the ray.
            view_dir = view_dir @ quat_to_matrix(quat_conj(gset.sh_frame_rotation)).T
        color = evaluate_sh(gset.sh_coeffs[sel], view_dir)

        means.append(np.stack([u[sel], v[sel]], axis=1).astype(np.float32))
        conics.append(conic.astype(np.float32))
        extents.append(extent.astype(np.float32))
        depths.append(tz[sel].astype(np.float32))
        colors.append(color.astype(np.float32))
        alphas.append((1.0 / (1.0 + np.exp(-gset.opacities_logit[sel]))).astype(np.float32))
        covs.append(cov2d[sel])
        if want_features:
            feats.append(gset.features[sel].astype(np.float32))
        idx.append(offset + sel)
        offset += n

    if not means:
        f_dim = sets[0].features.shape[1] if want_features and sets else 0
        return ProjectedSplats(
            mean2d=np.zeros((0, 2), np.float32),
            conic=np.zeros((0, 3), np.float32),
            extent=np.zeros((0, 2), np.float32),
            depth=np.zeros(0, np.float32),
            color=np.zeros((0, 3), np.float32),
            alpha_base=np.zeros(0, np.float32),
            cov2d=np.zeros((0, 2, 2)),
            feature=np.zeros((0, f_dim), np.float32) if want_features else None,
            source_index=np.zeros(0, np.int64),
        )

    return ProjectedSplats(
        mean2d=np.concatenate(means),
        conic=np.concatenate(conics),
        extent=np.concatenate(extents),
        depth=np.concatenate(depths),
        color=np.concatenate(colors),
        alpha_base=np.concatenate(alphas),
        cov2d=np.concatenate(covs),
        feature=np.concatenate(feats) if want_features else None,
        source_index=np.concatenate(idx),
    )


def project_gaussian(gset: GaussianSet, index: int, camera: Camera) -> Splat2D | None:
    """Project one splat of a set; None means culled."""
    proj = project_sets([gset.select([index])], camera)
    if proj.count == 0:
        return None
    return Splat2D(
        mean2d=proj.mean2d[0].astype(np.float64),
        cov2d=proj.cov2d[0],
        depth=float(proj.depth[0]),
        color=proj.color[0].astype(np.float64),
        alpha_base=float(proj.alpha_base[0]),
        feature=None if proj.feature is None else proj.feature[0].astype(np.float64),
    )
