"""Lossless PNG I/O for images and label masks.

Images are stored as 8-bit RGB, masks as 8-bit palette indices. Encoding
is deterministic, so equal arrays always produce equal bytes.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import ShapeMismatchError

MAX_LABELS = 255


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to 8-bit with round-half-even."""
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_float(img_u8: np.ndarray) -> np.ndarray:
    return img_u8.astype(np.float64) / 255.0


def _label_palette() -> list[int]:
    """Fixed 256-entry palette: label 0 black, others distinct bright colors."""
    flat = [0, 0, 0]
    for i in range(1, 256):
        # Golden-angle hue walk keeps adjacent labels visually distinct.
        h = (i * 0.618033988749895) % 1.0
        r, g, b = _hsv_to_rgb(h, 0.85, 1.0 if i % 2 else 0.75)
        flat.extend([int(r * 255), int(g * 255), int(b * 255)])
    return flat


def _hsv_to_rgb(h: float, s: float, v: float) -> tuple[float, float, float]:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return ((v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q))[i]


_PALETTE = _label_palette()


def encode_image_png(img_u8: np.ndarray) -> bytes:
    if img_u8.ndim != 3 or img_u8.shape[2] != 3 or img_u8.dtype != np.uint8:
        raise ShapeMismatchError(f"expected uint8 (H, W, 3), got {img_u8.dtype} {img_u8.shape}")
    buf = io.BytesIO()
    Image.fromarray(img_u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def encode_mask_png(mask: np.ndarray) -> bytes:
    if mask.ndim != 2:
        raise ShapeMismatchError(f"expected 2D mask, got shape {mask.shape}")
    if mask.min() < 0 or mask.max() > MAX_LABELS:
        raise ShapeMismatchError(f"mask labels must lie in [0, {MAX_LABELS}]")
    pil = Image.fromarray(mask.astype(np.uint8), mode="P")
    pil.putpalette(_PALETTE)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_image_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as pil:
        arr = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    return arr


def decode_mask_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as pil:
        if pil.mode not in ("P", "L"):
            raise ShapeMismatchError(f"mask PNG must be indexed or grayscale, got mode {pil.mode}")
        arr = np.asarray(pil, dtype=np.int32)
    return arr


def write_image_png(path: str, img_u8: np.ndarray) -> bytes:
    data = encode_image_png(img_u8)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def write_mask_png(path: str, mask: np.ndarray) -> bytes:
    data = encode_mask_png(mask)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def read_image_png(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image_png(fh.read())


def read_mask_png(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_mask_png(fh.read())
