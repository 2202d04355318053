"""Sorted alpha-compositing rasterization of projected Gaussian splats.

Two implementations of one contract:

  rasterize            tile-based (16x16), splats binned to every tile their
                       3σ ellipse AABB overlaps
  reference_rasterize  brute force, every pixel against the full depth-sorted
                       splat list — the oracle the tiled path is checked
                       against

Shared semantics: global depth sort ascending (ties broken by splat index),
alpha = min(0.99, base * exp(-..5 d' Σ⁻¹ d)) evaluated inside the splat's 3σ
axis-aligned footprint and treated as zero outside it (the same rule binning
uses), contributions below 1/255 skipped, traversal stops when transmittance
would drop below 1e-4. Per-splat alphas are computed in float32; compositing
sums run in float64 so tiling changes results only at the 1e-12 level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..assets.gaussians import GaussianSet
from ..assets.gsdf import Camera
from .projection import ProjectedSplats, project_sets

TILE = 16
ALPHA_CLAMP = np.float32(0.99)
ALPHA_SKIP = np.float32(1.0 / 255.0)
TRANSMITTANCE_STOP = 1e-4
_DEPTH_EPS = 1e-10


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 3) float32 in [0, 1]
    depth: np.ndarray  # (H, W) float32, alpha-weighted expected depth
    alpha: np.ndarray  # (H, W) float32 in [0, 1]
    feature: np.ndarray | None = None  # (H, W, d) float32


def _normalize_inputs(splats, camera: Camera, background_color) -> tuple[list[GaussianSet], np.ndarray]:
    sets = [splats] if isinstance(splats, GaussianSet) else list(splats)
    bg = np.asarray(background_color, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(bg)):
        raise ValueError("background color must be finite")
    return sets, bg


def _sorted_projection(sets: list[GaussianSet], camera: Camera) -> ProjectedSplats:
    proj = project_sets(sets, camera)
    if proj.count == 0:
        return proj
    order = np.argsort(proj.depth, kind="stable")
    return ProjectedSplats(
        mean2d=proj.mean2d[order],
        conic=proj.conic[order],
        extent=proj.extent[order],
        depth=proj.depth[order],
        color=proj.color[order],
        alpha_base=proj.alpha_base[order],
        cov2d=proj.cov2d[order],
        feature=None if proj.feature is None else proj.feature[order],
        source_index=proj.source_index[order],
    )


def _alphas(px: np.ndarray, py: np.ndarray, proj: ProjectedSplats, sel=slice(None)) -> np.ndarray:
    """Float32 alpha matrix (pixels, splats) for the selected splats."""
    dx = px[:, None] - proj.mean2d[sel, 0][None, :]
    dy = py[:, None] - proj.mean2d[sel, 1][None, :]
    inside = (np.abs(dx) <= proj.extent[sel, 0][None, :]) & (np.abs(dy) <= proj.extent[sel, 1][None, :])
    conic = proj.conic[sel]
    power = np.float32(-0.5) * (conic[None, :, 0] * dx * dx + conic[None, :, 2] * dy * dy)
    power -= conic[None, :, 1] * dx * dy
    alpha = np.minimum(ALPHA_CLAMP, proj.alpha_base[sel][None, :] * np.exp(power))
    alpha[~inside | (power > 0) | (alpha < ALPHA_SKIP)] = np.float32(0.0)
    return alpha


def _composite(alpha: np.ndarray, colors, depths, features, bg: np.ndarray):
    """Front-to-back compositing of an (npix, nsplat) alpha matrix."""
    one_minus = 1.0 - alpha.astype(np.float64)
    t_incl = np.cumprod(one_minus, axis=1)
    t_excl = np.empty_like(t_incl)
    t_excl[:, 0] = 1.0
    t_excl[:, 1:] = t_incl[:, :-1]
    # Traversal stops before the splat that would push T below the threshold.
    alive = t_incl >= TRANSMITTANCE_STOP
    weights = alpha.astype(np.float64) * t_excl * alive
    # T at the last alive splat equals the exclusive T of the first dead one.
    t_final = t_incl[:, -1].copy()
    crossed = ~alive.all(axis=1)
    first_dead = np.argmin(alive, axis=1)
    t_final[crossed] = t_excl[crossed, first_dead[crossed]]

    acc_alpha = weights.sum(axis=1)
    color = weights @ colors.astype(np.float64) + t_final[:, None] * bg[None, :]
    depth = (weights @ depths.astype(np.float64)) / np.maximum(acc_alpha, _DEPTH_EPS)
    feat = None if features is None else weights @ features.astype(np.float64)
    return color, depth, acc_alpha, feat


def reference_rasterize(splats, camera: Camera, background_color=(0.0, 0.0, 0.0)) -> RenderOutput:
    """Oracle path: per-pixel traversal of all depth-sorted splats, no tiling."""
    sets, bg = _normalize_inputs(splats, camera, background_color)
    h, w = camera.height, camera.width
    proj = _sorted_projection(sets, camera)

    color = np.tile(bg.astype(np.float32), (h, w, 1))
    depth = np.zeros((h, w), np.float32)
    alpha_out = np.zeros((h, w), np.float32)
    feature = None
    if proj.feature is not None:
        feature = np.zeros((h, w, proj.feature.shape[1]), np.float32)
    if proj.count == 0:
        return RenderOutput(color, depth, alpha_out, feature)

    ys, xs = np.mgrid[0:h, 0:w]
    px = xs.reshape(-1).astype(np.float32)
    py = ys.reshape(-1).astype(np.float32)

    chunk = 8192
    for start in range(0, px.shape[0], chunk):
        end = min(start + chunk, px.shape[0])
        alpha = _alphas(px[start:end], py[start:end], proj)
        c, d, a, f = _composite(alpha, proj.color, proj.depth, proj.feature, bg)
        rows = slice(start, end)
        color.reshape(-1, 3)[rows] = c.astype(np.float32)
        depth.reshape(-1)[rows] = d.astype(np.float32)
        alpha_out.reshape(-1)[rows] = a.astype(np.float32)
        if feature is not None:
            feature.reshape(-1, feature.shape[2])[rows] = f.astype(np.float32)
    return RenderOutput(color, depth, alpha_out, feature)


def rasterize(splats, camera: Camera, background_color=(0.0, 0.0, 0.0)) -> RenderOutput:
    """Production path: 16x16 tiles, splats binned by 3σ AABB overlap."""
    sets, bg = _normalize_inputs(splats, camera, background_color)
    h, w = camera.height, camera.width
    proj = _sorted_projection(sets, camera)

    color = np.tile(bg.astype(np.float32), (h, w, 1))
    depth = np.zeros((h, w), np.float32)
    alpha_out = np.zeros((h, w), np.float32)
    feature = None
    if proj.feature is not None:
        feature = np.zeros((h, w, proj.feature.shape[1]), np.float32)
    if proj.count == 0:
        return RenderOutput(color, depth, alpha_out, feature)

    x_lo = proj.mean2d[:, 0] - proj.extent[:, 0]
    x_hi = proj.mean2d[:, 0] + proj.extent[:, 0]
    y_lo = proj.mean2d[:, 1] - proj.extent[:, 1]
    y_hi = proj.mean2d[:, 1] + proj.extent[:, 1]

    for ty in range(0, h, TILE):
        ty1 = min(ty + TILE, h)
        row_mask = (y_hi >= ty) & (y_lo <= ty1 - 1)
        if not row_mask.any():
            continue
        for tx in range(0, w, TILE):
            tx1 = min(tx + TILE, w)
            mask = row_mask & (x_hi >= tx) & (x_lo <= tx1 - 1)
            sel = np.flatnonzero(mask)  # preserves global depth order
            if sel.size == 0:
                continue
            ys, xs = np.mgrid[ty:ty1, tx:tx1]
            px = xs.reshape(-1).astype(np.float32)
            py = ys.reshape(-1).astype(np.float32)
            alpha = _alphas(px, py, proj, sel)
            c, d, a, f = _composite(
                alpha,
                proj.color[sel],
                proj.depth[sel],
                None if proj.feature is None else proj.feature[sel],
                bg,
            )
            shape = (ty1 - ty, tx1 - tx)
            color[ty:ty1, tx:tx1] = c.astype(np.float32).reshape(*shape, 3)
            depth[ty:ty1, tx:tx1] = d.astype(np.float32).reshape(shape)
            alpha_out[ty:ty1, tx:tx1] = a.astype(np.float32).reshape(shape)
            if feature is not None:
                feature[ty:ty1, tx:tx1] = f.astype(np.float32).reshape(*shape, -1)
    return RenderOutput(color, depth, alpha_out, feature)
