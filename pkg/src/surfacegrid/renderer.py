"""Binary white-on-black renders of grid/line-marked surfaces.

The grid pattern lives in the surface's parameter (world x, y) plane, not
in screen space: a fragment is white iff its world coordinates fall on a
grid line, so line spacing is uniform along the surface.  The surface body
between lines is opaque black, which hides far-side contours, and the
background is black.  Outputs are strictly binary.

Mask phase: for an unrotated grid, lines start at world 0 and repeat every
``spacing`` (a fragment is on a line iff ``coord mod spacing < line_width``).
Rotated grids spin the test point by -grid_angle about the domain center
(256, 256) first.  The domain boundary band is drawn unrotated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussians import DOMAIN_SIZE, FieldGrid
from .geometry import Viewpoint, raster_heightfield

PATTERNS = ("grid", "lines_u", "lines_v")


@dataclass(frozen=True)
class GridSpec:
    """Surface marking parameters.

    spacing_u / spacing_v are the effective pattern periods (gap plus line
    width) along the world x and y axes respectively.
    """

    pattern: str = "grid"
    spacing_u: float = 20.0
    spacing_v: float = 20.0
    line_width: float = 3.0
    grid_angle_deg: float = 0.0
    draw_boundary: bool = True

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern {self.pattern!r} not one of {PATTERNS}")
        if not self.line_width > 0:
            raise ValueError(f"line_width={self.line_width} must be positive")
        for name, sp in (("spacing_u", self.spacing_u), ("spacing_v", self.spacing_v)):
            if not sp > self.line_width:
                raise ValueError(f"{name}={sp} must exceed line_width={self.line_width}")
        if not (0.0 <= self.grid_angle_deg < 90.0):
            raise ValueError(f"grid_angle_deg={self.grid_angle_deg} outside [0, 90)")


def line_mask(g: GridSpec, x, y):
    """True where world point (x, y) falls on a line of the pattern."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if g.grid_angle_deg != 0.0:
        a = math.radians(g.grid_angle_deg)
        c, s = math.cos(a), math.sin(a)
        dx = x - 256.0
        dy = y - 256.0
        xr = 256.0 + c * dx + s * dy
        yr = 256.0 - s * dx + c * dy
    else:
        xr, yr = x, y

    on_u = np.mod(xr, g.spacing_u) < g.line_width
    on_v = np.mod(yr, g.spacing_v) < g.line_width
    if g.pattern == "grid":
        mask = on_u | on_v
    elif g.pattern == "lines_u":
        mask = on_u
    else:
        mask = on_v

    if g.draw_boundary:
        w = g.line_width
        mask = mask | (x < w) | (x > DOMAIN_SIZE - w) | (y < w) | (y > DOMAIN_SIZE - w)
    return mask


def render_surface(field: FieldGrid, v: Viewpoint, g: GridSpec) -> np.ndarray:
    """Binary surface render (uint8, values {0, 1}), same z-buffer as depth."""
    r = raster_heightfield(field, v)
    white = np.zeros_like(r.covered, dtype=bool)
    cov = r.covered
    white[cov] = line_mask(g, r.world_x[cov], r.world_y[cov])
    return white.astype(np.uint8)


def binarize_real_plot(image: np.ndarray, mode: str = "auto_threshold",
                       threshold: float | None = None) -> np.ndarray:
    """Binarize a grayscale plot scan into a white-on-black 512x512 image.

    mode 'auto_threshold' picks the threshold maximizing between-class
    variance of a 256-bin histogram; mode 'fixed' uses ``threshold`` on the
    same [0, 1] scale.  Polarity is normalized to white-on-black (inverted
    when more than half the pixels come out white), and the result is
    resampled to 512x512 with nearest-neighbor.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected single-channel image, got shape {img.shape}")
    if img.dtype == np.uint8:
        gray = img.astype(np.float64) / 255.0
    elif img.dtype == np.uint16:
        gray = img.astype(np.float64) / 65535.0
    else:
        gray = img.astype(np.float64)
    if gray.min() == gray.max():
        raise ValueError("no structure: image is constant")

    if mode == "auto_threshold":
        t = _otsu_threshold(gray)
    elif mode == "fixed":
        if threshold is None:
            raise ValueError("mode 'fixed' requires a threshold")
        t = float(threshold)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    binary = gray > t
    if binary.mean() > 0.5:
        binary = ~binary
    return _resample_nearest(binary, 512, 512).astype(np.uint8)


def _otsu_threshold(gray: np.ndarray) -> float:
    """Between-class-variance threshold on a 256-bin histogram of [0, 1]."""
    hist, edges = np.histogram(gray, bins=256, range=(0.0, 1.0))
    hist = hist.astype(np.float64)
    total = hist.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist)
    w1 = total - w0
    sum0 = np.cumsum(hist * centers)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = sum0 / w0
        mu1 = (sum0[-1] - sum0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    k = int(np.argmax(between))
    return float(edges[k + 1])


def _resample_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape
    rows = np.minimum((np.floor((np.arange(out_h) + 0.5) * h / out_h)).astype(np.int64), h - 1)
    cols = np.minimum((np.floor((np.arange(out_w) + 0.5) * w / out_w)).astype(np.int64), w - 1)
    return img[rows[:, None], cols[None, :]]
