"""Image export: 8-bit PNG for color, raw float32 with a small header for
depth/alpha/feature planes.

Float binary layout, little-endian: magic b"GSR1" | uint32 H | uint32 W |
uint32 channels (16-byte header), then H*W*channels float32 values.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

FLOAT_MAGIC = b"GSR1"


def to_uint8(color: np.ndarray) -> np.ndarray:
    """Quantize a [0,1] float image; the one rule used everywhere in the kit."""
    return np.clip(np.round(np.asarray(color, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_png(path, color: np.ndarray) -> None:
    Image.fromarray(to_uint8(color), mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Returns the stored uint8 array (H, W, 3)."""
    return np.asarray(Image.open(path).convert("RGB"))


def encode_float_image(plane: np.ndarray) -> bytes:
    arr = np.asarray(plane, dtype="<f4")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError("expected (H, W) or (H, W, C) array")
    h, w, c = arr.shape
    return FLOAT_MAGIC + struct.pack("<III", h, w, c) + arr.tobytes()


def decode_float_image(blob: bytes) -> np.ndarray:
    if blob[:4] != FLOAT_MAGIC:
        raise ValueError("bad magic for float image")
    h, w, c = struct.unpack("<III", blob[4:16])
    expected = h * w * c * 4
    if len(blob) != 16 + expected:
        raise ValueError(f"float image payload length {len(blob) - 16}, expected {expected}")
    arr = np.frombuffer(blob, dtype="<f4", offset=16).reshape(h, w, c)
    return arr[:, :, 0] if c == 1 else arr


def save_float_image(path, plane: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_float_image(plane))


def load_float_image(path) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_float_image(f.read())
