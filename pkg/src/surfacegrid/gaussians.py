"""Random sums of 2D Gaussians: the functions underlying every surface.

Every surface in the dataset is a heightfield z = G(x, y) over the closed
square [0, 512]^2 (pixel units), where G is a sum of 1..10 anisotropic,
rotated Gaussian bumps.  Each bump's amplitude is derived from a shared
normalization volume so that the (signed) volume under any single bump is
exactly ``NORMAL_VOLUME``.

Sampling convention (used everywhere downstream, bit-exact): a field of
``n`` samples per axis covers [0, 512] with step ``512 / n`` and offset
half a step, i.e. sample (i, j) of the default 512x512 grid sits at world
coordinates ``x = j + 0.5``, ``y = i + 0.5``.  This puts the sample-lattice
center at (256, 256), the same point the camera orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DOMAIN_SIZE = 512.0
DEFAULT_RESOLUTION = 512
SIGMA_MIN = 8.0
SIGMA_MAX = 512.0
MAX_COMPONENTS = 10

# Volume under each bump.  Chosen so an isotropic sigma=64 component peaks
# at exactly 64 height-pixels; see README for the reasoning.
NORMAL_VOLUME = 2.0 * math.pi * 64.0**3


class FunctionFormatError(ValueError):
    """Raised when a function parameter file is malformed."""


@dataclass(frozen=True)
class GaussianComponent:
    """One rotated anisotropic Gaussian bump.

    ``rot`` is the orientation of the sigma_x axis, in radians, limited to
    [0, pi) because a centered 2D Gaussian has period pi in orientation.
    """

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rot: float
    sign: int

    def __post_init__(self):
        if not (0.0 <= self.mu_x <= DOMAIN_SIZE and 0.0 <= self.mu_y <= DOMAIN_SIZE):
            raise ValueError(f"mu=({self.mu_x}, {self.mu_y}) outside [0, {DOMAIN_SIZE}]^2")
        for name, s in (("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)):
            if not (SIGMA_MIN <= s <= SIGMA_MAX):
                raise ValueError(f"{name}={s} outside [{SIGMA_MIN}, {SIGMA_MAX}]")
        if not (0.0 <= self.rot < math.pi):
            raise ValueError(f"rot={self.rot} outside [0, pi)")
        if self.sign not in (1, -1):
            raise ValueError(f"sign={self.sign} must be +1 or -1")

    @property
    def amplitude(self) -> float:
        """Signed peak height; volume under the bump is +-NORMAL_VOLUME."""
        return self.sign * NORMAL_VOLUME / (2.0 * math.pi * self.sigma_x * self.sigma_y)

    def value(self, x, y):
        """Evaluate the bump at world coordinates (scalar or ndarray)."""
        dx = np.asarray(x, dtype=np.float64) - self.mu_x
        dy = np.asarray(y, dtype=np.float64) - self.mu_y
        c = math.cos(self.rot)
        s = math.sin(self.rot)
        # offset from mu rotated by -rot, so the exponent is axis-aligned
        xr = c * dx + s * dy
        yr = -s * dx + c * dy
        q = xr * xr / (2.0 * self.sigma_x**2) + yr * yr / (2.0 * self.sigma_y**2)
        return self.amplitude * np.exp(-q)


@dataclass(frozen=True)
class SurfaceFunction:
    """A sum of 1..10 Gaussian components, identified by a dataset-wide id."""

    id: int
    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"id={self.id} must be >= 0")
        if not (1 <= len(self.components) <= MAX_COMPONENTS):
            raise ValueError(
                f"function {self.id} has {len(self.components)} components, "
                f"expected 1..{MAX_COMPONENTS}"
            )

    def value(self, x, y):
        """Evaluate G at world coordinates (scalar or ndarray)."""
        total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=np.float64)
        for comp in self.components:
            total += comp.value(x, y)
        return total


@dataclass(frozen=True)
class FieldGrid:
    """Sampled heightfield.  values[i, j] is G at the cell center of (i, j)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise ValueError(
                f"values shape {self.values.shape} != ({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


def sample_coords(n: int) -> np.ndarray:
    """World coordinates of the n sample centers along one axis of [0, 512]."""
    step = DOMAIN_SIZE / n
    return (np.arange(n, dtype=np.float64) + 0.5) * step


def synth_function(master_seed: int, fid: int) -> SurfaceFunction:
    """Deterministically synthesize function ``fid`` under ``master_seed``.

    The RNG stream is derived solely from (master_seed, fid), so the same
    pair gives a bit-identical parameter list on every platform.  Draw
    order is fixed: component count, then per component mu_x, mu_y,
    sigma_x, sigma_y, rot, sign.
    """
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(fid,)))
    n = int(rng.integers(1, MAX_COMPONENTS + 1))
    comps = []
    for _ in range(n):
        mu_x = rng.uniform(0.0, DOMAIN_SIZE)
        mu_y = rng.uniform(0.0, DOMAIN_SIZE)
        sigma_x = rng.uniform(SIGMA_MIN, SIGMA_MAX)
        sigma_y = rng.uniform(SIGMA_MIN, SIGMA_MAX)
        rot = rng.uniform(0.0, math.pi)
        sign = 1 if rng.integers(0, 2) == 1 else -1
        comps.append(GaussianComponent(mu_x, mu_y, sigma_x, sigma_y, rot, sign))
    return SurfaceFunction(fid, tuple(comps))


def eval_function(f: SurfaceFunction, res: tuple[int, int] = (DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)) -> FieldGrid:
    """Sample G on the (height, width) grid of cell centers.

    Components are accumulated in order, so a 2-component evaluation is
    bitwise the sum of the 1-component evaluations.
    """
    height, width = res
    if height <= 0 or width <= 0:
        raise ValueError(f"resolution {res} must be positive")
    xs = sample_coords(width)
    ys = sample_coords(height)
    xg, yg = np.meshgrid(xs, ys)
    total = np.zeros((height, width), dtype=np.float64)
    for comp in f.components:
        total += comp.value(xg, yg)
    return FieldGrid(width=width, height=height, values=total)


# --- parameter files -------------------------------------------------------
#
# Grammar (one function per file, text, '#' starts a comment line):
#
#   line 1:  <id> <component-count>
#   then exactly <component-count> lines:
#            <mu_x> <mu_y> <sigma_x> <sigma_y> <rot> <sign>
#
# Floats are written with repr() (shortest round-trip), sign as +1 / -1.

_FIELDS = ("mu_x", "mu_y", "sigma_x", "sigma_y", "rot", "sign")


def save_function(f: SurfaceFunction, path) -> None:
    lines = [f"{f.id} {len(f.components)}"]
    for c in f.components:
        sign = "+1" if c.sign == 1 else "-1"
        lines.append(f"{c.mu_x!r} {c.mu_y!r} {c.sigma_x!r} {c.sigma_y!r} {c.rot!r} {sign}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_function(path) -> SurfaceFunction:
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.readlines()
    rows = [
        (lineno, line.strip())
        for lineno, line in enumerate(raw, start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise FunctionFormatError(f"{path}: empty file")

    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2:
        raise FunctionFormatError(f"{path}:{lineno}: header must be '<id> <count>'")
    try:
        fid, count = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FunctionFormatError(f"{path}:{lineno}: bad header: {exc}") from None
    if not (1 <= count <= MAX_COMPONENTS):
        raise FunctionFormatError(
            f"{path}:{lineno}: component count {count} outside 1..{MAX_COMPONENTS}"
        )
    if len(rows) - 1 != count:
        raise FunctionFormatError(
            f"{path}: header declares {count} components, found {len(rows) - 1}"
        )

    comps = []
    for lineno, line in rows[1:]:
        parts = line.split()
        if len(parts) != len(_FIELDS):
            raise FunctionFormatError(
                f"{path}:{lineno}: expected {len(_FIELDS)} fields, got {len(parts)}"
            )
        vals = {}
        for name, token in zip(_FIELDS, parts):
            try:
                vals[name] = int(token) if name == "sign" else float(token)
            except ValueError:
                raise FunctionFormatError(
                    f"{path}:{lineno}: field '{name}': cannot parse {token!r}"
                ) from None
        try:
            comps.append(GaussianComponent(**vals))
        except ValueError as exc:
            raise FunctionFormatError(f"{path}:{lineno}: {exc}") from None
    try:
        return SurfaceFunction(fid, tuple(comps))
    except ValueError as exc:
        raise FunctionFormatError(f"{path}: {exc}") from None
