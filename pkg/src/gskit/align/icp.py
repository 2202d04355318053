"""Point-to-point ICP with a fixed metric scale (6 DoF, no similarity term).

Each iteration matches every source point to its nearest target point, trims
pairs beyond an absolute distance cutoff, and solves the rigid least-squares
fit in closed form (SVD of the cross-covariance with a determinant correction
to keep the rotation proper). The fit step can only lower the rms over the
matched pairs; that monotonicity is asserted every iteration.

The trimming cutoff anneals: it starts at 3x the median initial mismatch and
halves per iteration down to the configured floor. A hard floor from the
first iteration would discard every correspondence under the large initial
misalignments the aligner must absorb (tens of degrees, tens of
centimeters); the floor still governs the converged refinement, which is
where trimming matters for outlier robustness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import RigidTransform, quat_from_matrix


class IcpError(ValueError):
    pass


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    correspondence_cutoff: float = 0.05  # meters
    convergence_delta: float = 1e-7  # on rms change


@dataclass
class AlignmentResult:
    transform: RigidTransform
    rms_residual: float
    inlier_fraction: float
    iterations_used: int

    def __post_init__(self):
        if self.rms_residual < 0:
            raise ValueError("rms_residual must be >= 0")
        if not 0.0 <= self.inlier_fraction <= 1.0:
            raise ValueError("inlier_fraction must be in [0, 1]")


def _fit_rigid(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid fit mapping source onto target (Kabsch)."""
    sc, tc = source.mean(axis=0), target.mean(axis=0)
    h = (source - sc).T @ (target - tc)
    u, svals, vt = np.linalg.svd(h)
    if svals[1] < 1e-12 * max(svals[0], 1.0):
        raise IcpError("degenerate fit: correspondences are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        raise IcpError("degenerate fit: reflection-only solution")
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(quat_from_matrix(r), tc - r @ sc)


def _check_cloud(cloud: np.ndarray, name: str) -> np.ndarray:
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
        raise IcpError(f"{name} cloud needs at least 3 points of dimension 3")
    if not np.isfinite(pts).all():
        raise IcpError(f"{name} cloud contains non-finite points")
    centered = pts - pts.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] < 1e-12 * max(svals[0], 1.0):
        raise IcpError(f"{name} cloud is collinear")
    return pts


def icp_align(
    source: np.ndarray,
    target: np.ndarray,
    init: RigidTransform | None = None,
    params: IcpParams | None = None,
) -> AlignmentResult:
    """Trimmed point-to-point ICP; returns the better of two deterministic
    starts (the given init, and init shifted so the cloud centroids match).

    The centroid start rescues dense full-overlap clouds whose nearest
    neighbor distances underestimate the true displacement; the plain start
    is the right one when the target contains much more than the source
    (robot model against a whole-scene scan). The winner is the local
    minimum with more inliers, then lower trimmed rms.
    """
    source = _check_cloud(source, "source")
    target = _check_cloud(target, "target")
    params = params or IcpParams()
    init = init or RigidTransform.identity()

    tree = cKDTree(target)
    shift = target.mean(axis=0) - init.apply(source).mean(axis=0)
    centered = RigidTransform(translation=shift) @ init

    best: AlignmentResult | None = None
    errors: list[IcpError] = []
    for start in (init, centered):
        try:
            result = _icp_run(source, target, tree, start, params)
        except IcpError as e:
            errors.append(e)
            continue
        if best is None or (
            (round(result.inlier_fraction, 3), -result.rms_residual)
            > (round(best.inlier_fraction, 3), -best.rms_residual)
        ):
            best = result
    if best is None:
        raise errors[0]
    return best


def _icp_run(
    source: np.ndarray,
    target: np.ndarray,
    tree: cKDTree,
    init: RigidTransform,
    params: IcpParams,
) -> AlignmentResult:
    transform = init
    initial_dist, _ = tree.query(transform.apply(source))
    cutoff = max(params.correspondence_cutoff, 3.0 * float(np.median(initial_dist)))

    prev_rms = None
    iterations = 0
    level_iterations = 0
    inlier_fraction = 0.0
    rms = 0.0

    for iterations in range(1, params.max_iterations + 1):
        moved = transform.apply(source)
        dist, idx = tree.query(moved)
        inliers = dist <= cutoff
        if not inliers.any():
            raise IcpError(
                f"no correspondences within cutoff {cutoff:.4g} m "
                f"(nearest pair at {dist.min():.4g} m)"
            )
        inlier_fraction = float(inliers.mean())
        matched_src = source[inliers]
        matched_tgt = target[idx[inliers]]

        rms_before = float(np.sqrt(np.mean(np.sum((moved[inliers] - matched_tgt) ** 2, axis=1))))
        transform = _fit_rigid(matched_src, matched_tgt)
        refit = transform.apply(matched_src)
        rms = float(np.sqrt(np.mean(np.sum((refit - matched_tgt) ** 2, axis=1))))
        assert rms <= rms_before + 1e-9 * (1.0 + rms_before), (
            "rigid fit increased rms on fixed correspondences"
        )

        # Iterate to convergence at the current cutoff level, then tighten;
        # converged at the floor means done. Coarse levels only need rough
        # convergence (and a per-level cap) so the floor gets the budget.
        at_floor = cutoff == params.correspondence_cutoff
        level_iterations += 1
        if at_floor:
            if prev_rms is not None and abs(prev_rms - rms) < params.convergence_delta:
                break
            prev_rms = rms
        else:
            rough_delta = max(params.convergence_delta, 1e-3 * cutoff)
            settled = prev_rms is not None and abs(prev_rms - rms) < rough_delta
            if settled or level_iterations >= 8:
                cutoff = max(params.correspondence_cutoff, 0.5 * cutoff)
                prev_rms = None  # rms across anneal levels is not comparable
                level_iterations = 0
            else:
                prev_rms = rms

    return AlignmentResult(
        transform=transform,
        rms_residual=rms,
        inlier_fraction=inlier_fraction,
        iterations_used=iterations,
    )
