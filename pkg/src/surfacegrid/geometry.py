"""Camera model and ground-truth depth projection of heightfields.

The camera sits at distance r from the domain center c0 = (256, 256, 0),
at spherical azimuth/elevation (theta, phi), and projects orthographically
along its view axis.  Depth maps store, per pixel, an affine encoding of
the winning fragment's distance along the view axis:

    value = 0.5 + depth_along / (2 * 512),  clamped to [1/65535, 1]

so larger values are nearer to the camera, the flat z = 0 plane maps to
exactly 0.5, and 0 is reserved for background (no surface on the ray).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._raster import BACKGROUND, rasterize_mesh
from .gaussians import DEFAULT_RESOLUTION, FieldGrid, sample_coords

DEFAULT_RADIUS = 1024.0
DEPTH_HALF_RANGE = 512.0
DEPTH_FLOOR = 1.0 / 65535.0
CENTER = np.array([256.0, 256.0, 0.0])

_EXACT_SIN = {0: 0.0, 90: 1.0, 180: 0.0, 270: -1.0}


def _sindg(a: float) -> float:
    """sin of degrees, exact at multiples of 90 (so phi=90 is truly top-down)."""
    r = a % 360.0
    if r in _EXACT_SIN:
        return _EXACT_SIN[int(r)]
    return math.sin(math.radians(a))


def _cosdg(a: float) -> float:
    return _sindg(a + 90.0)


@dataclass(frozen=True)
class Viewpoint:
    """Camera position in spherical coordinates about the domain center."""

    azimuth_deg: float
    elevation_deg: float
    r: float = DEFAULT_RADIUS

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"r={self.r} must be positive")
        if not (0.0 <= self.azimuth_deg < 360.0):
            raise ValueError(f"azimuth {self.azimuth_deg} outside [0, 360)")
        if not (0.0 <= self.elevation_deg <= 90.0):
            raise ValueError(f"elevation {self.elevation_deg} outside [0, 90]")


@dataclass(frozen=True)
class ProjectionFrame:
    """Orthonormal camera frame: view direction d points at the camera."""

    d: np.ndarray
    right: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        for a, b in ((self.right, self.d), (self.up, self.d), (self.right, self.up)):
            if abs(float(a @ b)) > 1e-12:
                raise ValueError("frame vectors not orthogonal")
        for a in (self.d, self.right, self.up):
            if abs(float(a @ a) - 1.0) > 1e-12:
                raise ValueError("frame vector not unit length")


def frame_from_viewpoint(v: Viewpoint) -> ProjectionFrame:
    st, ct = _sindg(v.azimuth_deg), _cosdg(v.azimuth_deg)
    sp, cp = _sindg(v.elevation_deg), _cosdg(v.elevation_deg)
    d = np.array([cp * ct, cp * st, sp])
    right = np.array([-st, ct, 0.0])
    up = np.array([-sp * ct, -sp * st, cp])
    return ProjectionFrame(d=d, right=right, up=up)


def project_point(frame: ProjectionFrame, p) -> tuple[float, float, float]:
    """Orthographic projection to continuous image coords plus depth-along-view."""
    rel = np.asarray(p, dtype=np.float64) - CENTER
    u = float(rel @ frame.right) + 256.0
    v = 256.0 - float(rel @ frame.up)
    return u, v, float(rel @ frame.d)


def encode_depth(depth_along, covered):
    """Affine depth encoding; background pixels become exactly 0."""
    value = 0.5 + np.asarray(depth_along) / (2.0 * DEPTH_HALF_RANGE)
    value = np.clip(value, DEPTH_FLOOR, 1.0)
    return np.where(covered, value, 0.0)


@dataclass(frozen=True)
class RasterResult:
    """Raw z-buffer output shared by the depth and surface render paths."""

    depth_along: np.ndarray  # distance along view axis, BACKGROUND where uncovered
    world_x: np.ndarray      # winning fragment's world x (NaN where uncovered)
    world_y: np.ndarray
    covered: np.ndarray      # bool


def raster_heightfield(field: FieldGrid, v: Viewpoint) -> RasterResult:
    """Project and z-buffer the triangulated heightfield at 512x512."""
    if (field.height, field.width) != (DEFAULT_RESOLUTION, DEFAULT_RESOLUTION):
        raise ValueError(f"field must be {DEFAULT_RESOLUTION}x{DEFAULT_RESOLUTION}")
    frame = frame_from_viewpoint(v)
    xs = sample_coords(field.width)
    ys = sample_coords(field.height)
    xg, yg = np.meshgrid(xs - 256.0, ys - 256.0)
    z = field.values
    rx, ry, rz = frame.right
    ux, uy, uz = frame.up
    dx, dy, dz = frame.d
    u = xg * rx + yg * ry + z * rz + 256.0
    vv = 256.0 - (xg * ux + yg * uy + z * uz)
    s = xg * dx + yg * dy + z * dz
    zbuf, xbuf, ybuf = rasterize_mesh(
        u, vv, s, xs, ys, DEFAULT_RESOLUTION, DEFAULT_RESOLUTION
    )
    covered = zbuf > BACKGROUND / 2.0
    return RasterResult(depth_along=zbuf, world_x=xbuf, world_y=ybuf, covered=covered)


def render_depth(field: FieldGrid, v: Viewpoint) -> np.ndarray:
    """Ground-truth depth map: float64 in [0, 1], 0 = background."""
    r = raster_heightfield(field, v)
    return encode_depth(r.depth_along, r.covered)


# --- independent test oracle ------------------------------------------------
# A ray-marching depth probe sharing no code with the rasterizer above: it
# intersects the ray with the *bilinear* interpolant of the samples, by
# fixed-step marching plus bisection refinement.  Used only by tests.

_MARCH_STEP = 0.25


def _bilinear(field: FieldGrid, x, y):
    """Bilinear height at world (x, y); NaN outside the sample extent."""
    fx = np.asarray(x, dtype=np.float64) - 0.5
    fy = np.asarray(y, dtype=np.float64) - 0.5
    inside = (fx >= 0.0) & (fx <= field.width - 1) & (fy >= 0.0) & (fy <= field.height - 1)
    fxc = np.clip(fx, 0.0, field.width - 1 - 1e-12)
    fyc = np.clip(fy, 0.0, field.height - 1 - 1e-12)
    j0 = fxc.astype(np.int64)
    i0 = fyc.astype(np.int64)
    tx = fxc - j0
    ty = fyc - i0
    z = field.values
    val = (
        z[i0, j0] * (1 - tx) * (1 - ty)
        + z[i0, j0 + 1] * tx * (1 - ty)
        + z[i0 + 1, j0] * (1 - tx) * ty
        + z[i0 + 1, j0 + 1] * tx * ty
    )
    return np.where(inside, val, np.nan)


def _ray_crossings(field: FieldGrid, v: Viewpoint, pixel: tuple[int, int], max_hits: int = 4):
    """Depth-along-view of successive ray/surface crossings, nearest first."""
    frame = frame_from_viewpoint(v)
    row, col = pixel
    origin = CENTER + (col + 0.5 - 256.0) * frame.right - (row + 0.5 - 256.0) * frame.up
    d = frame.d
    zmax = float(field.values.max())
    zmin = float(field.values.min())
    horiz = 256.0 * (abs(d[0]) + abs(d[1]))
    s_hi = horiz + d[2] * max(zmax, 0.0) + 1.0
    s_lo = -horiz + d[2] * min(zmin, 0.0) - 1.0
    n = int(math.ceil((s_hi - s_lo) / _MARCH_STEP)) + 1
    svals = s_hi - _MARCH_STEP * np.arange(n)
    pts = origin[None, :] + svals[:, None] * d[None, :]
    height = _bilinear(field, pts[:, 0], pts[:, 1])
    f = pts[:, 2] - height  # positive above the surface, NaN off-domain

    def refine(s_above: float, s_below: float) -> float:
        for _ in range(60):
            mid = 0.5 * (s_above + s_below)
            p = origin + mid * d
            h = _bilinear(field, p[0], p[1])
            if np.isnan(h) or p[2] - h > 0.0:
                s_above = mid
            else:
                s_below = mid
        return 0.5 * (s_above + s_below)

    hits = []
    prev_ok = False
    for k in range(n):
        if np.isnan(f[k]):
            prev_ok = False
            continue
        if f[k] <= 0.0:
            if prev_ok:
                hits.append(refine(svals[k - 1], svals[k]))
            else:
                hits.append(float(svals[k]))  # entered the domain already submerged
            if len(hits) >= max_hits:
                break
            # skip ahead until the ray re-emerges above the surface
            prev_ok = False
            while k + 1 < n and not (f[k + 1] > 0.0):
                k += 1
                f[k] = np.nan
            continue
        prev_ok = True
    # de-duplicate: marching may re-detect the same crossing after skip-ahead
    dedup: list[float] = []
    for h in hits:
        if not dedup or abs(dedup[-1] - h) > _MARCH_STEP / 2:
            dedup.append(h)
    return dedup


def depth_oracle(field: FieldGrid, v: Viewpoint, pixel: tuple[int, int]) -> float:
    """Encoded depth at one pixel by ray marching; 0.0 if the ray misses."""
    hits = _ray_crossings(field, v, pixel, max_hits=1)
    if not hits:
        return 0.0
    return float(encode_depth(np.float64(hits[0]), True))
