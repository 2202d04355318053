"""Binary frame wire format for the teleoperation stream.

One frame message:  b"GSFR" | uint32 header_len | header JSON (UTF-8) | raw
RGB payload (height*width*3 bytes, row-major). Header fields: session,
step_index, camera, width, height. Little-endian throughout; raw RGB keeps
the format trivially verifiable end to end.
"""

from __future__ import annotations

import json
import struct

import numpy as np

FRAME_MAGIC = b"GSFR"


def encode_frame(session_id: str, step_index: int, camera: str, rgb: np.ndarray) -> bytes:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("frame payload must be (H, W, 3) uint8")
    h, w = rgb.shape[:2]
    header = json.dumps(
        {"session": session_id, "step_index": int(step_index), "camera": camera,
         "width": w, "height": h},
        separators=(",", ":"),
    ).encode("utf-8")
    return FRAME_MAGIC + struct.pack("<I", len(header)) + header + rgb.tobytes()


def decode_frame(blob: bytes) -> tuple[dict, np.ndarray]:
    if blob[:4] != FRAME_MAGIC:
        raise ValueError("bad frame magic")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    w, h = int(header["width"]), int(header["height"])
    payload = blob[8 + hlen :]
    if len(payload) != h * w * 3:
        raise ValueError(f"frame payload length {len(payload)}, expected {h * w * 3}")
    rgb = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return header, rgb
