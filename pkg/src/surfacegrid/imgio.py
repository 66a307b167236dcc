"""PNG I/O for the two dataset image kinds.

Depth maps are 16-bit single-channel PNGs holding round(65535 * value);
surface renders are 8-bit single-channel PNGs with values {0, 255}.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def write_depth_png(values: np.ndarray, path) -> None:
    """values: float in [0, 1]; stored as uint16."""
    raw = np.round(np.asarray(values, dtype=np.float64) * 65535.0).astype(np.uint16)
    Image.fromarray(raw, mode="I;16").save(path, format="PNG")


def read_depth_png(path) -> np.ndarray:
    """Decoded float64 depth in [0, 1]."""
    img = Image.open(path)
    raw = np.asarray(img, dtype=np.uint16)
    if raw.ndim != 2:
        raise ValueError(f"{path}: expected single-channel depth image")
    return raw.astype(np.float64) / 65535.0


def write_surface_png(binary: np.ndarray, path) -> None:
    """binary: {0, 1}; stored as {0, 255} uint8."""
    arr = np.asarray(binary)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("surface image must be strictly binary")
    Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(path, format="PNG")


def read_surface_png(path) -> np.ndarray:
    """Binary {0, 1} uint8 array."""
    img = Image.open(path)
    raw = np.asarray(img)
    if raw.ndim != 2:
        raise ValueError(f"{path}: expected single-channel surface image")
    return (raw > 127).astype(np.uint8)


def read_grayscale(path) -> np.ndarray:
    """Any image as float64 grayscale in [0, 1] (for plot preprocessing)."""
    img = Image.open(path)
    if img.mode not in ("L", "I;16", "I"):
        img = img.convert("L")
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype == np.uint16:
        return arr.astype(np.float64) / 65535.0
    out = arr.astype(np.float64)
    if out.max() > 1.0:
        out = out / out.max()
    return out
