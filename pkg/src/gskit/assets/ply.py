"""Binary PLY reader/writer for Gaussian splat sets.

File layout follows the de-facto splat-training convention: one `vertex`
element, float32 properties
    x y z nx ny nz f_dc_0..2 [f_rest_0..K] opacity scale_0..2 rot_0..3
with K in {8, 23, 44} for SH degree 1..3 (absent for degree 0). The normals
nx, ny, nz are parsed and ignored; they are written as zeros. f_rest is
channel-grouped: all higher-order coefficients of channel 0, then channel 1,
then channel 2, each block in ascending (l, m) order.

Quaternions are stored (w, x, y, z) in rot_0..3 and normalized on load.
Normalization is skipped when the stored norm is already within 1e-6 of one
so that files produced by this module round-trip bit-exactly.
"""

from __future__ import annotations

import re

import numpy as np

from .gaussians import SH_COEFFS_PER_DEGREE, GaussianSet

_F_REST_COUNTS = {0: 0, 1: 9, 2: 24, 3: 45}  # 3 * ((l+1)^2 - 1)


class SplatFileError(ValueError):
    """Raised on malformed splat files; carries byte offset and property name."""

    def __init__(self, message: str, byte_offset: int | None = None, prop: str | None = None):
        detail = message
        if prop is not None:
            detail += f" (property {prop})"
        if byte_offset is not None:
            detail += f" (byte offset {byte_offset})"
        super().__init__(detail)
        self.byte_offset = byte_offset
        self.prop = prop


def _required_properties(f_rest_count: int) -> list[str]:
    props = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    props += [f"f_rest_{i}" for i in range(f_rest_count)]
    props += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return props


def _parse_header(blob: bytes):
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply\n") or end < 0:
        raise SplatFileError("malformed header: missing ply magic or end_header", byte_offset=0)
    header_len = end + len(b"end_header\n")
    lines = blob[:end].decode("ascii", errors="replace").split("\n")

    if "format binary_little_endian 1.0" not in lines[1:]:
        raise SplatFileError("malformed header: expected binary_little_endian 1.0", byte_offset=4)

    count = None
    props: list[str] = []
    in_vertex = False
    for line in lines:
        if line.startswith("comment") or line in ("ply", "format binary_little_endian 1.0", ""):
            continue
        m = re.fullmatch(r"element (\w+) (\d+)", line)
        if m:
            if m.group(1) != "vertex" or count is not None:
                raise SplatFileError(f"expected a single vertex element, got '{line}'")
            count = int(m.group(2))
            in_vertex = True
            continue
        m = re.fullmatch(r"property (\w+) ([\w.]+)", line)
        if m:
            if not in_vertex:
                raise SplatFileError(f"property before vertex element: '{line}'")
            if m.group(1) != "float":
                raise SplatFileError("only float32 properties supported", prop=m.group(2))
            props.append(m.group(2))
            continue
        raise SplatFileError(f"malformed header line: '{line}'")
    if count is None:
        raise SplatFileError("malformed header: no vertex element")
    return count, props, header_len


def parse_splat_file(blob: bytes) -> GaussianSet:
    count, props, header_len = _parse_header(blob)

    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    if n_rest not in _F_REST_COUNTS.values():
        raise SplatFileError(
            f"{n_rest} f_rest properties do not form a complete SH degree",
            prop=f"f_rest_{n_rest - 1}" if n_rest else "f_rest_0",
        )
    required = _required_properties(n_rest)
    for p in props:
        if p not in required:
            raise SplatFileError("unknown property", prop=p)
    if len(props) != len(set(props)):
        raise SplatFileError("duplicate property in header")
    for p in required:
        if p not in props:
            raise SplatFileError("missing required property", prop=p)

    stride = 4 * len(props)
    payload = blob[header_len:]
    if len(payload) < count * stride:
        raise SplatFileError(
            f"truncated payload: expected {count * stride} bytes, got {len(payload)}",
            byte_offset=header_len + len(payload),
        )
    if len(payload) > count * stride:
        raise SplatFileError("trailing bytes after vertex data", byte_offset=header_len + count * stride)

    raw = np.frombuffer(payload, dtype="<f4").reshape(count, len(props)).astype(np.float64)
    col = {p: i for i, p in enumerate(props)}

    finite = np.isfinite(raw)
    if not finite.all():
        i, j = np.argwhere(~finite)[0]
        raise SplatFileError(
            "non-finite value",
            byte_offset=header_len + int(i) * stride + 4 * int(j),
            prop=props[int(j)],
        )

    centroids = raw[:, [col["x"], col["y"], col["z"]]]
    rotations = raw[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]]
    scales_log = raw[:, [col["scale_0"], col["scale_1"], col["scale_2"]]]
    opacities = raw[:, col["opacity"]]

    degree = {0: 0, 9: 1, 24: 2, 45: 3}[n_rest]
    k = SH_COEFFS_PER_DEGREE[degree]
    sh = np.zeros((count, 3, k))
    for c in range(3):
        sh[:, c, 0] = raw[:, col[f"f_dc_{c}"]]
    per_channel = k - 1
    for c in range(3):
        for j in range(per_channel):
            sh[:, c, 1 + j] = raw[:, col[f"f_rest_{c * per_channel + j}"]]

    if count:
        norms = np.linalg.norm(rotations, axis=1)
        bad = norms == 0
        if bad.any():
            i = int(np.argmax(bad))
            raise SplatFileError(
                "degenerate zero rotation",
                byte_offset=header_len + i * stride + 4 * col["rot_0"],
                prop="rot_0",
            )
        fix = np.abs(norms - 1.0) > 1e-6
        rotations[fix] /= norms[fix, None]

    out = GaussianSet(centroids, rotations, scales_log, opacities, sh)
    out.validate()
    return out


def write_splat_file(gset: GaussianSet) -> bytes:
    gset.validate()
    if gset.features is not None:
        raise ValueError("feature vectors are not representable in the splat file format")
    if gset.sh_frame_rotation is not None:
        raise ValueError("posed sets carry render-time SH state and cannot be serialized")

    k = gset.sh_coeffs.shape[2]
    n_rest = 3 * (k - 1)
    props = _required_properties(n_rest)

    header = "ply\nformat binary_little_endian 1.0\n"
    header += f"element vertex {gset.count}\n"
    header += "".join(f"property float {p}\n" for p in props)
    header += "end_header\n"

    raw = np.zeros((gset.count, len(props)), dtype="<f4")
    col = {p: i for i, p in enumerate(props)}
    raw[:, [col["x"], col["y"], col["z"]]] = gset.centroids.astype("<f4")
    for c in range(3):
        raw[:, col[f"f_dc_{c}"]] = gset.sh_coeffs[:, c, 0].astype("<f4")
    for c in range(3):
        for j in range(k - 1):
            raw[:, col[f"f_rest_{c * (k - 1) + j}"]] = gset.sh_coeffs[:, c, 1 + j].astype("<f4")
    raw[:, col["opacity"]] = gset.opacities_logit.astype("<f4")
    raw[:, [col["scale_0"], col["scale_1"], col["scale_2"]]] = gset.scales_log.astype("<f4")
    raw[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]] = gset.rotations.astype("<f4")

    if not np.isfinite(raw).all():
        i = int(np.argwhere(~np.isfinite(raw))[0][0])
        raise ValueError(f"non-finite value at splat {i} does not fit float32")
    return header.encode("ascii") + raw.tobytes()


def load_splat_file(path) -> GaussianSet:
    with open(path, "rb") as f:
        return parse_splat_file(f.read())


def save_splat_file(path, gset: GaussianSet) -> None:
    with open(path, "wb") as f:
        f.write(write_splat_file(gset))
