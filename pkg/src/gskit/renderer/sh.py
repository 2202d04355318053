"""Real spherical-harmonics color evaluation, degrees 0..3.

Constants and basis ordering follow the splat-training ecosystem convention
so assets trained elsewhere render with the colors they were optimized for.
Color = sum_lm Y_lm(d) * c_lm + 0.5, clamped to [0, 1].
"""

from __future__ import annotations

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


def sh_basis(directions: np.ndarray, l_max: int) -> np.ndarray:
    """Basis values Y_lm(d) for unit directions (N, 3); returns (N, (l_max+1)^2)."""
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    n = d.shape[0]
    out = np.empty((n, (l_max + 1) ** 2))
    out[:, 0] = SH_C0
    if l_max >= 1:
        out[:, 1] = -SH_C1 * y
        out[:, 2] = SH_C1 * z
        out[:, 3] = -SH_C1 * x
    if l_max >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out[:, 4] = SH_C2[0] * xy
        out[:, 5] = SH_C2[1] * yz
        out[:, 6] = SH_C2[2] * (2.0 * zz - xx - yy)
        out[:, 7] = SH_C2[3] * xz
        out[:, 8] = SH_C2[4] * (xx - yy)
    if l_max >= 3:
        out[:, 9] = SH_C3[0] * y * (3.0 * xx - yy)
        out[:, 10] = SH_C3[1] * xy * z
        out[:, 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
        out[:, 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[:, 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
        out[:, 14] = SH_C3[5] * z * (xx - yy)
        out[:, 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def evaluate_sh(coeffs: np.ndarray, directions: np.ndarray, l_max: int | None = None) -> np.ndarray:
    """RGB for coefficients (N, 3, K) or (3, K) at unit directions (N, 3) or (3,)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    single = coeffs.ndim == 2
    if single:
        coeffs = coeffs[None]
        directions = np.atleast_2d(directions)
    k = coeffs.shape[2]
    if l_max is None:
        l_max = int(np.sqrt(k)) - 1
    basis = sh_basis(directions, l_max)[:, :k]
    rgb = np.einsum("nck,nk->nc", coeffs, basis) + 0.5
    rgb = np.clip(rgb, 0.0, 1.0)
    return rgb[0] if single else rgb
