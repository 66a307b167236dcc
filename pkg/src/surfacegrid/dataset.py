"""Dataset planning, building, and subset definitions.

The default (full-scale) plan renders, per function: ground-truth depth
maps from ten viewpoints (a 3x3 azimuth/elevation octant grid {0,30,60}^2
plus one held-out generic viewpoint at (45, 22.5)), and grid/line-marked
surface renders according to a frozen recipe of marking categories.  The
manifest (JSON lines, one record per artifact) is the single source of
truth tying surfaces to their paired depth maps and to the named
training/validation/test pools.

Recipe totals with the default 2000 functions: 2000 function files,
20,000 depth maps, 79,200 surface renders.  The surface composition is a
declared default (the published total constrains it only loosely); it is
frozen here and regression-locked by the test suite.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import imgio
from .gaussians import SurfaceFunction, eval_function, save_function, synth_function
from .geometry import Viewpoint, encode_depth, raster_heightfield
from .renderer import GridSpec, line_mask

SCHEMA_VERSION = 1

TRAINING_VARIANTS = ("Baseline", "Viewpoints", "AngledGrids", "Lines", "Final")
TEST_SETS = (
    "Base",
    "Resolutions",
    "AngledGrids",
    "Lines",
    "Viewpoints",
    "AccViewpoints",
    "GeneralGrids",
    "GeneralViews",
    "Full",
)

OCTANT_VIEWPOINTS = tuple(
    (float(az), float(el)) for el in (0.0, 30.0, 60.0) for az in (0.0, 30.0, 60.0)
)
HELD_OUT_VIEWPOINT = (45.0, 22.5)
DEFAULT_VIEWPOINTS = OCTANT_VIEWPOINTS + (HELD_OUT_VIEWPOINT,)

# Viewpoints considered "seen, non-extreme" by the narrow test pools: the
# octant row at generic elevation 30.  Elevations 0 and 60 are the octant's
# extremes (edge-on / near-top-down) and are exercised only by the
# AccViewpoints pool; (45, 22.5) never enters a training pool and serves as
# the unseen generic viewpoint.
BASE_TEST_VIEWPOINTS = ((0.0, 30.0), (30.0, 30.0), (60.0, 30.0))
EXTREME_ELEVATIONS = (0.0, 60.0)
GENERIC_TRAIN_VIEWPOINT = (30.0, 30.0)

SQUARE_RESOLUTIONS = (20.0, 28.0, 37.0, 45.0)
LINE_RESOLUTION = 37.0
ANISO_RESOLUTION = (20.0, 28.0)
TRAIN_GRID_ANGLES = (30.0, 60.0)
TEST_GRID_ANGLES = (30.0, 50.0, 60.0)


def _grid(su, sv=None, angle=0.0, pattern="grid"):
    sv = su if sv is None else sv
    return GridSpec(pattern=pattern, spacing_u=float(su), spacing_v=float(sv),
                    line_width=3.0, grid_angle_deg=float(angle))


# Surface categories: (GridSpec, viewpoints, span) where span selects the
# function-id range: "all", "val+test", or "train-half" (first half of the
# training range; enough to populate the angled training pool without
# inflating the total).
@dataclass(frozen=True)
class SurfaceCategory:
    grid: GridSpec
    viewpoints: tuple[tuple[float, float], ...]
    span: str = "all"


DEFAULT_RECIPE = (
    tuple(
        SurfaceCategory(_grid(res), OCTANT_VIEWPOINTS) for res in SQUARE_RESOLUTIONS
    )
    + (
        SurfaceCategory(_grid(20.0), (HELD_OUT_VIEWPOINT,)),
        SurfaceCategory(_grid(LINE_RESOLUTION, pattern="lines_u"), ((30.0, 30.0),)),
        SurfaceCategory(
            _grid(LINE_RESOLUTION, pattern="lines_u"),
            ((0.0, 30.0), (60.0, 30.0)),
            span="val+test",
        ),
    )
    + tuple(
        SurfaceCategory(_grid(20.0, angle=a), ((30.0, 30.0),), span="train-half")
        for a in TRAIN_GRID_ANGLES
    )
    + tuple(
        SurfaceCategory(_grid(20.0, angle=a), ((30.0, 30.0),), span="val+test")
        for a in TEST_GRID_ANGLES
    )
    + (
        SurfaceCategory(_grid(*ANISO_RESOLUTION), ((30.0, 30.0),), span="val+test"),
        SurfaceCategory(
            _grid(LINE_RESOLUTION, angle=30.0, pattern="lines_u"),
            ((30.0, 30.0),),
            span="val+test",
        ),
    )
)


@dataclass(frozen=True)
class BuildConfig:
    """Everything that determines dataset content (hashable into config_hash)."""

    master_seed: int = 0
    functions: int = 2000
    viewpoints: tuple[tuple[float, float], ...] | None = None  # None: default ten
    grids: tuple[GridSpec, ...] | None = None  # None: frozen default recipe
    train_range: tuple[int, int] = (0, 1800)
    val_range: tuple[int, int] = (1800, 1900)
    test_range: tuple[int, int] = (1900, 2000)
    threads: int | None = None

    def __post_init__(self):
        if self.functions < 1:
            raise ValueError("functions must be >= 1")
        t, v, s = self.train_range, self.val_range, self.test_range
        if not (0 <= t[0] < t[1] <= v[0] < v[1] <= s[0] < s[1]):
            raise ValueError(f"split ranges must be ordered and disjoint: {t} {v} {s}")
        if self.viewpoints is not None:
            for az, el in self.viewpoints:
                Viewpoint(az, el)  # validates

    def effective_viewpoints(self) -> tuple[tuple[float, float], ...]:
        return DEFAULT_VIEWPOINTS if self.viewpoints is None else tuple(self.viewpoints)

    def content_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "functions": self.functions,
            "viewpoints": self.effective_viewpoints(),
            "grids": "default-recipe-v1" if self.grids is None
            else [_grid_dict(g) for g in self.grids],
            "train_range": self.train_range,
            "val_range": self.val_range,
            "test_range": self.test_range,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.content_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RenderJob:
    kind: str  # "function" | "depth" | "surface"
    function_id: int
    path: str
    viewpoint: tuple[float, float] | None = None
    grid: GridSpec | None = None
    depth_path: str | None = None


def _fmt(x: float) -> str:
    return f"{x:g}"


def _function_path(fid: int) -> str:
    return f"functions/fn{fid:05d}.txt"


def _depth_path(fid: int, vp) -> str:
    return f"depth/fn{fid:05d}_az{_fmt(vp[0])}_el{_fmt(vp[1])}.png"


def _grid_tag(g: GridSpec) -> str:
    if g.pattern == "grid":
        body = f"g{_fmt(g.spacing_u)}x{_fmt(g.spacing_v)}"
    elif g.pattern == "lines_u":
        body = f"u{_fmt(g.spacing_u)}"
    else:
        body = f"v{_fmt(g.spacing_v)}"
    tag = f"{body}w{_fmt(g.line_width)}r{_fmt(g.grid_angle_deg)}"
    if not g.draw_boundary:
        tag += "nb"
    return tag


def _surface_path(fid: int, vp, g: GridSpec) -> str:
    return f"surface/fn{fid:05d}_az{_fmt(vp[0])}_el{_fmt(vp[1])}_{_grid_tag(g)}.png"


def _grid_dict(g: GridSpec) -> dict:
    return {
        "pattern": g.pattern,
        "spacing_u": g.spacing_u,
        "spacing_v": g.spacing_v,
        "line_width": g.line_width,
        "grid_angle_deg": g.grid_angle_deg,
        "draw_boundary": g.draw_boundary,
    }


def _span_range(cfg: BuildConfig, span: str) -> range:
    if span == "all":
        return range(0, cfg.functions)
    if span == "val+test":
        lo = min(cfg.val_range[0], cfg.functions)
        hi = min(cfg.test_range[1], cfg.functions)
        return range(lo, hi)
    if span == "train-half":
        lo = cfg.train_range[0]
        hi = min(lo + (cfg.train_range[1] - lo) // 2, cfg.functions)
        return range(lo, hi)
    raise ValueError(f"unknown span {span!r}")


def plan_dataset(config: BuildConfig) -> list[RenderJob]:
    """Deterministic, sorted job list for the configured dataset."""
    vps = config.effective_viewpoints()
    jobs: list[RenderJob] = []
    for fid in range(config.functions):
        jobs.append(RenderJob("function", fid, _function_path(fid)))
    for fid in range(config.functions):
        for vp in vps:
            jobs.append(RenderJob("depth", fid, _depth_path(fid, vp), viewpoint=vp))

    if config.grids is None:
        categories = DEFAULT_RECIPE
    else:
        categories = tuple(SurfaceCategory(g, vps) for g in config.grids)
    for cat in categories:
        for fid in _span_range(config, cat.span):
            for vp in cat.viewpoints:
                if vp not in vps:
                    raise ValueError(f"recipe viewpoint {vp} not in configured viewpoints")
                jobs.append(
                    RenderJob(
                        "surface",
                        fid,
                        _surface_path(fid, vp, cat.grid),
                        viewpoint=vp,
                        grid=cat.grid,
                        depth_path=_depth_path(fid, vp),
                    )
                )

    order = {"function": 0, "depth": 1, "surface": 2}
    jobs.sort(key=lambda j: (order[j.kind], j.path))
    paths = [j.path for j in jobs]
    if len(set(paths)) != len(paths):
        raise ValueError("plan produced duplicate output paths")
    return jobs


# --- subset tagging ---------------------------------------------------------

def _is_square20(g: GridSpec) -> bool:
    return (g.pattern == "grid" and g.spacing_u == 20.0 and g.spacing_v == 20.0
            and g.grid_angle_deg == 0.0)


def _training_pools(vp, g: GridSpec) -> list[str]:
    """Training-variant pools an image type belongs to (fid range aside)."""
    pools = []
    in_octant = vp in OCTANT_VIEWPOINTS
    baseline = _is_square20(g) and vp == GENERIC_TRAIN_VIEWPOINT
    viewpoints = _is_square20(g) and in_octant
    angled = (g.pattern == "grid" and g.spacing_u == 20.0 and g.spacing_v == 20.0
              and g.grid_angle_deg in TRAIN_GRID_ANGLES and in_octant)
    lines = (g.pattern == "lines_u" and g.spacing_u == LINE_RESOLUTION
             and g.grid_angle_deg == 0.0 and in_octant)
    if baseline:
        pools.append("Baseline")
    if viewpoints:
        pools.append("Viewpoints")
    if viewpoints or angled:
        pools.append("AngledGrids")
    if viewpoints or lines:
        pools.append("Lines")
    if viewpoints or angled or lines:
        pools.append("Final")
    return pools


def _test_pools(vp, g: GridSpec) -> list[str]:
    """Test-set pools an image type belongs to."""
    in_base_vp = vp in BASE_TEST_VIEWPOINTS
    base = _is_square20(g) and in_base_vp
    new_res = (g.pattern == "grid" and g.grid_angle_deg == 0.0 and in_base_vp
               and (g.spacing_u, g.spacing_v) != (20.0, 20.0))
    new_angle = (g.pattern == "grid" and g.spacing_u == 20.0 and g.spacing_v == 20.0
                 and g.grid_angle_deg in TEST_GRID_ANGLES and in_base_vp)
    lines = (g.pattern == "lines_u" and g.grid_angle_deg == 0.0 and in_base_vp)
    new_vp = _is_square20(g) and vp == HELD_OUT_VIEWPOINT
    extreme = (_is_square20(g) and vp in OCTANT_VIEWPOINTS
               and vp[1] in EXTREME_ELEVATIONS)

    pools = ["Full"]
    if base:
        pools.append("Base")
    if base or new_res:
        pools.append("Resolutions")
    if base or new_angle:
        pools.append("AngledGrids")
    if base or lines:
        pools.append("Lines")
    if base or new_vp:
        pools.append("Viewpoints")
    if base or extreme:
        pools.append("AccViewpoints")
    if base or new_res or new_angle or lines:
        pools.append("GeneralGrids")
    if base or new_vp:
        pools.append("GeneralViews")
    return pools


def tags_for(fid: int, vp, g: GridSpec, config: BuildConfig) -> list[str]:
    t, v, s = config.train_range, config.val_range, config.test_range
    if t[0] <= fid < t[1]:
        return [f"train:{p}" for p in _training_pools(vp, g)]
    if v[0] <= fid < v[1]:
        return [f"val:{p}" for p in _training_pools(vp, g)]
    if s[0] <= fid < s[1]:
        return [f"test:{p}" for p in _test_pools(vp, g)]
    return []


# --- manifest ---------------------------------------------------------------

class ManifestError(ValueError):
    pass


@dataclass
class Manifest:
    master_seed: int
    config_hash: str
    functions: int
    ranges: dict
    records: list[dict] = field(default_factory=list)

    MANIFEST_NAME = "manifest.jsonl"

    def surface_records(self):
        return [r for r in self.records if r["kind"] == "surface"]

    def depth_records(self):
        return [r for r in self.records if r["kind"] == "depth"]

    def function_records(self):
        return [r for r in self.records if r["kind"] == "function"]

    def save(self, path) -> None:
        header = {
            "kind": "header",
            "schema": SCHEMA_VERSION,
            "master_seed": self.master_seed,
            "config_hash": self.config_hash,
            "functions": self.functions,
            "ranges": self.ranges,
        }
        with open(path, "w", encoding="ascii") as fh:
            for rec in [header] + self.records:
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise ManifestError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("kind") != "header":
            raise ManifestError(f"{path}: first line is not a header record")
        if header.get("schema") != SCHEMA_VERSION:
            raise ManifestError(f"{path}: unsupported schema {header.get('schema')}")
        records = [json.loads(ln) for ln in lines[1:]]
        return cls(
            master_seed=header["master_seed"],
            config_hash=header["config_hash"],
            functions=header["functions"],
            ranges=header["ranges"],
            records=records,
        )

    def validate(self) -> None:
        """Check the manifest invariants; raise ManifestError on violation."""
        paths = [r["path"] for r in self.records]
        if len(set(paths)) != len(paths):
            raise ManifestError("duplicate paths in manifest")
        rg = self.ranges
        spans = [tuple(rg["train"]), tuple(rg["val"]), tuple(rg["test"])]
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if not (a0 < a1 <= b0 < b1):
                raise ManifestError(f"split ranges overlap or are unordered: {spans}")
        depth_keys = {
            (r["function"], r["azimuth_deg"], r["elevation_deg"]): r["path"]
            for r in self.depth_records()
        }
        closed = {f"train:{v}" for v in TRAINING_VARIANTS} \
            | {f"val:{v}" for v in TRAINING_VARIANTS} \
            | {f"test:{t}" for t in TEST_SETS}
        for r in self.surface_records():
            key = (r["function"], r["azimuth_deg"], r["elevation_deg"])
            if key not in depth_keys:
                raise ManifestError(f"{r['path']}: no depth record for {key}")
            if depth_keys[key] != r["depth_path"]:
                raise ManifestError(f"{r['path']}: depth_path mismatch")
            for tag in r["tags"]:
                if tag not in closed:
                    raise ManifestError(f"{r['path']}: unknown tag {tag}")
                prefix = tag.split(":")[0]
                lo, hi = rg[prefix]
                if not (lo <= r["function"] < hi):
                    raise ManifestError(
                        f"{r['path']}: tag {tag} outside function range [{lo},{hi})"
                    )


def _manifest_from_plan(config: BuildConfig, jobs: list[RenderJob]) -> Manifest:
    records = []
    for j in jobs:
        if j.kind == "function":
            records.append({"kind": "function", "id": j.function_id, "path": j.path})
        elif j.kind == "depth":
            records.append({
                "kind": "depth",
                "function": j.function_id,
                "azimuth_deg": j.viewpoint[0],
                "elevation_deg": j.viewpoint[1],
                "r": 1024.0,
                "path": j.path,
            })
        else:
            records.append({
                "kind": "surface",
                "function": j.function_id,
                "azimuth_deg": j.viewpoint[0],
                "elevation_deg": j.viewpoint[1],
                "r": 1024.0,
                **_grid_dict(j.grid),
                "path": j.path,
                "depth_path": j.depth_path,
                "tags": tags_for(j.function_id, j.viewpoint, j.grid, config),
            })
    return Manifest(
        master_seed=config.master_seed,
        config_hash=config.config_hash(),
        functions=config.functions,
        ranges={
            "train": list(config.train_range),
            "val": list(config.val_range),
            "test": list(config.test_range),
        },
        records=records,
    )


# --- building ---------------------------------------------------------------

@dataclass
class BuildReport:
    executed: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def _run_function_jobs(config: BuildConfig, out_dir: str, fid: int,
                       jobs: list[RenderJob]) -> BuildReport:
    """Render everything for one function: field evaluated once, shared."""
    report = BuildReport()
    fn: SurfaceFunction | None = None
    fg = None
    cache: dict[tuple[float, float], "object"] = {}
    for j in jobs:
        target = os.path.join(out_dir, j.path)
        if os.path.exists(target):
            report.skipped += 1
            continue
        try:
            if fn is None:
                fn = synth_function(config.master_seed, fid)
            if j.kind == "function":
                save_function(fn, target)
            else:
                if fg is None:
                    fg = eval_function(fn)
                vp = j.viewpoint
                if vp not in cache:
                    cache[vp] = raster_heightfield(fg, Viewpoint(vp[0], vp[1]))
                r = cache[vp]
                if j.kind == "depth":
                    imgio.write_depth_png(encode_depth(r.depth_along, r.covered), target)
                else:
                    white = np.zeros_like(r.covered, dtype=bool)
                    cov = r.covered
                    white[cov] = line_mask(j.grid, r.world_x[cov], r.world_y[cov])
                    imgio.write_surface_png(white.astype(np.uint8), target)
            report.executed += 1
        except Exception as exc:  # report per job, keep building
            report.failures.append((j.path, f"{type(exc).__name__}: {exc}"))
    return report


def build(config: BuildConfig, out_dir) -> tuple[Manifest, BuildReport]:
    """Execute the plan into out_dir and write the manifest.

    Re-running with the same config is idempotent: jobs whose output file
    already exists are skipped, so a partial build resumes where it left
    off, and a repeated build rewrites only the manifest (bit-identical).
    """
    out_dir = os.fspath(out_dir)
    jobs = plan_dataset(config)
    for sub in ("functions", "depth", "surface"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    with open(os.path.join(out_dir, "config.json"), "w", encoding="ascii") as fh:
        json.dump(config.content_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    by_fid: dict[int, list[RenderJob]] = {}
    for j in jobs:
        by_fid.setdefault(j.function_id, []).append(j)

    report = BuildReport()
    threads = config.threads or os.cpu_count() or 1
    items = sorted(by_fid.items())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(
                lambda item: _run_function_jobs(config, out_dir, item[0], item[1]),
                items,
            ))
    else:
        partials = [_run_function_jobs(config, out_dir, fid, fjobs) for fid, fjobs in items]
    for p in partials:
        report.executed += p.executed
        report.skipped += p.skipped
        report.failures.extend(p.failures)

    manifest = _manifest_from_plan(config, jobs)
    manifest.validate()
    manifest.save(os.path.join(out_dir, Manifest.MANIFEST_NAME))
    return manifest, report


# --- subset sampling --------------------------------------------------------

def _sample_pairs(m: Manifest, tag: str, size: int, seed: int) -> list[tuple[str, str]]:
    pool = sorted(
        (r["path"], r["depth_path"]) for r in m.surface_records() if tag in r["tags"]
    )
    if size > len(pool):
        raise ValueError(f"requested {size} pairs but pool {tag!r} has {len(pool)}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    idx = rng.permutation(len(pool))[:size]
    return [pool[i] for i in sorted(idx)]


def make_training_set(m: Manifest, variant: str, size: int = 1800,
                      seed: int = 0) -> list[tuple[str, str]]:
    """Shuffled sample of (surface, depth) pairs from a training pool."""
    if variant not in TRAINING_VARIANTS:
        raise ValueError(f"{variant!r} is not a training variant {TRAINING_VARIANTS}")
    return _sample_pairs(m, f"train:{variant}", size, seed)


def make_validation_set(m: Manifest, variant: str, size: int = 100,
                        seed: int = 0) -> list[tuple[str, str]]:
    """Validation pairs drawn from the variant's own image-type pool."""
    if variant not in TRAINING_VARIANTS:
        raise ValueError(f"{variant!r} is not a training variant {TRAINING_VARIANTS}")
    return _sample_pairs(m, f"val:{variant}", size, seed)


def make_test_set(m: Manifest, tag: str, size: int = 100,
                  seed: int = 0) -> list[tuple[str, str]]:
    """Test pairs for one named test set."""
    if tag not in TEST_SETS:
        raise ValueError(f"{tag!r} is not a test set {TEST_SETS}")
    return _sample_pairs(m, f"test:{tag}", size, seed)
