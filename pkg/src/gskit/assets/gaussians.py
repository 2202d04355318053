"""In-memory Gaussian splat sets.

Arrays keep the raw parameterization of the interchange files: log scales and
logit opacities. Activation (exp / sigmoid) happens in the renderer. Values
are held as float64 promotions of the float32 on-disk payload so geometry
stays exact under transformation; serialization casts back to float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Number of SH coefficients per channel for each supported max degree.
SH_COEFFS_PER_DEGREE = {0: 1, 1: 4, 2: 9, 3: 16}


def sh_degree_from_coeff_count(n: int) -> int:
    for deg, count in SH_COEFFS_PER_DEGREE.items():
        if count == n:
            return deg
    raise ValueError(f"{n} SH coefficients per channel does not match any degree in 0..3")


@dataclass
class GaussianSet:
    """A batch of 3D Gaussians: the unit of photorealistic appearance.

    centroids      (N, 3) positions, meters (world or link-local frame)
    rotations      (N, 4) unit quaternions, (w, x, y, z)
    scales_log     (N, 3) log of per-axis ellipsoid scale
    opacities_logit (N,)  pre-sigmoid opacity
    sh_coeffs      (N, 3, K) per-channel SH coefficients, K = (l_max+1)^2
    features       optional (N, d) view-independent feature vectors
    sh_frame_rotation  render-time state: quaternion mapping the frame the SH
                       coefficients were stored in to the current frame.
                       None means identity. Set by transform_gaussians; not
                       representable in the splat file format.
    """

    centroids: np.ndarray
    rotations: np.ndarray
    scales_log: np.ndarray
    opacities_logit: np.ndarray
    sh_coeffs: np.ndarray
    features: np.ndarray | None = None
    sh_frame_rotation: np.ndarray | None = None

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=np.float64))
        self.rotations = np.atleast_2d(np.asarray(self.rotations, dtype=np.float64))
        self.scales_log = np.atleast_2d(np.asarray(self.scales_log, dtype=np.float64))
        self.opacities_logit = np.asarray(self.opacities_logit, dtype=np.float64).reshape(-1)
        self.sh_coeffs = np.asarray(self.sh_coeffs, dtype=np.float64)
        if self.sh_coeffs.ndim != 3 or self.sh_coeffs.shape[1] != 3:
            raise ValueError("sh_coeffs must have shape (N, 3, K)")
        n = self.centroids.shape[0]
        for name, arr, cols in (
            ("rotations", self.rotations, 4),
            ("scales_log", self.scales_log, 3),
        ):
            if arr.shape != (n, cols):
                raise ValueError(f"{name} shape {arr.shape} inconsistent with count {n}")
        if self.opacities_logit.shape != (n,):
            raise ValueError("opacities_logit length inconsistent with count")
        if self.sh_coeffs.shape[0] != n:
            raise ValueError("sh_coeffs count inconsistent")
        sh_degree_from_coeff_count(self.sh_coeffs.shape[2])
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.ndim != 2 or self.features.shape[0] != n:
                raise ValueError("features must have shape (N, d)")

    @property
    def count(self) -> int:
        return self.centroids.shape[0]

    @property
    def sh_degree(self) -> int:
        return sh_degree_from_coeff_count(self.sh_coeffs.shape[2])

    def validate(self) -> None:
        for name in ("centroids", "rotations", "scales_log", "opacities_logit", "sh_coeffs"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.argwhere(~np.isfinite(arr))[0][0])
                raise ValueError(f"non-finite value in {name} at splat {bad}")
        if self.count:
            norms = np.linalg.norm(self.rotations, axis=1)
            worst = int(np.argmax(np.abs(norms - 1.0)))
            if abs(norms[worst] - 1.0) > 1e-6:
                raise ValueError(f"rotation of splat {worst} is not unit length ({norms[worst]})")

    def select(self, mask_or_indices) -> "GaussianSet":
        idx = np.asarray(mask_or_indices)
        return GaussianSet(
            centroids=self.centroids[idx],
            rotations=self.rotations[idx],
            scales_log=self.scales_log[idx],
            opacities_logit=self.opacities_logit[idx],
            sh_coeffs=self.sh_coeffs[idx],
            features=None if self.features is None else self.features[idx],
            sh_frame_rotation=self.sh_frame_rotation,
        )

    def equals(self, other: "GaussianSet") -> bool:
        """Field-by-field bit-exact equality (ignores render-time state)."""
        if self.count != other.count:
            return False
        same = (
            np.array_equal(self.centroids, other.centroids)
            and np.array_equal(self.rotations, other.rotations)
            and np.array_equal(self.scales_log, other.scales_log)
            and np.array_equal(self.opacities_logit, other.opacities_logit)
            and np.array_equal(self.sh_coeffs, other.sh_coeffs)
        )
        if not same:
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)

    def nbytes(self) -> int:
        total = (
            self.centroids.nbytes
            + self.rotations.nbytes
            + self.scales_log.nbytes
            + self.opacities_logit.nbytes
            + self.sh_coeffs.nbytes
        )
        if self.features is not None:
            total += self.features.nbytes
        return total

    @staticmethod
    def empty(sh_degree: int = 0, feature_dim: int | None = None) -> "GaussianSet":
        k = SH_COEFFS_PER_DEGREE[sh_degree]
        return GaussianSet(
            centroids=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            scales_log=np.zeros((0, 3)),
            opacities_logit=np.zeros(0),
            sh_coeffs=np.zeros((0, 3, k)),
            features=None if feature_dim is None else np.zeros((0, feature_dim)),
        )


def concatenate_sets(sets: list[GaussianSet]) -> GaussianSet:
    """Concatenate, dropping per-set render state (callers pose first)."""
    if not sets:
        return GaussianSet.empty()
    k = sets[0].sh_coeffs.shape[2]
    if any(s.sh_coeffs.shape[2] != k for s in sets):
        raise ValueError("cannot concatenate sets with mixed SH degrees")
    feats = None
    if all(s.features is not None for s in sets):
        feats = np.concatenate([s.features for s in sets])
    return GaussianSet(
        centroids=np.concatenate([s.centroids for s in sets]),
        rotations=np.concatenate([s.rotations for s in sets]),
        scales_log=np.concatenate([s.scales_log for s in sets]),
        opacities_logit=np.concatenate([s.opacities_logit for s in sets]),
        sh_coeffs=np.concatenate([s.sh_coeffs for s in sets]),
        features=feats,
    )
