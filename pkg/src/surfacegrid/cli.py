"""Command-line surface: gen-functions, build, eval, preprocess, inspect.

Every command validates its flags before touching the filesystem and
echoes the effective configuration into the output directory, so any run
can be reproduced from its outputs alone.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from collections import Counter

from . import imgio
from .dataset import (
    BuildConfig,
    Manifest,
    ManifestError,
    build,
    plan_dataset,
    _manifest_from_plan,
)
from .gaussians import save_function, synth_function
from .renderer import GridSpec, binarize_real_plot

_GRID_RE = re.compile(
    r"^(?P<pat>[uv])?(?P<su>\d+(?:\.\d+)?)(?:x(?P<sv>\d+(?:\.\d+)?))?"
    r"(?:w(?P<w>\d+(?:\.\d+)?))?(?:r(?P<rot>\d+(?:\.\d+)?))?$"
)


def parse_grid_token(token: str) -> GridSpec:
    """Tokens: '20' '20x28' 'u37' '20r30' 'u37w5r30' (spacing / width / angle)."""
    m = _GRID_RE.match(token.strip())
    if not m:
        raise argparse.ArgumentTypeError(f"bad grid token {token!r}")
    pat = {"u": "lines_u", "v": "lines_v", None: "grid"}[m.group("pat")]
    su = float(m.group("su"))
    sv = float(m.group("sv")) if m.group("sv") else su
    width = float(m.group("w")) if m.group("w") else 3.0
    rot = float(m.group("rot")) if m.group("rot") else 0.0
    try:
        return GridSpec(pattern=pat, spacing_u=su, spacing_v=sv,
                        line_width=width, grid_angle_deg=rot)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_viewpoints(text: str):
    out = []
    for tok in text.replace(";", " ").split():
        parts = tok.split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"bad viewpoint {tok!r}, want az,el")
        out.append((float(parts[0]), float(parts[1])))
    return tuple(out)


def _config_from_args(args) -> BuildConfig:
    kwargs = dict(master_seed=args.seed, functions=args.functions, threads=args.threads)
    if args.viewpoints:
        kwargs["viewpoints"] = parse_viewpoints(args.viewpoints)
    if args.grids:
        kwargs["grids"] = tuple(parse_grid_token(t) for t in args.grids.split(","))
    if args.ranges:
        vals = [int(v) for v in args.ranges.split(",")]
        if len(vals) != 6:
            raise SystemExit("--ranges wants 6 integers: t0,t1,v0,v1,s0,s1")
        kwargs["train_range"] = (vals[0], vals[1])
        kwargs["val_range"] = (vals[2], vals[3])
        kwargs["test_range"] = (vals[4], vals[5])
    return BuildConfig(**kwargs)


def _add_build_flags(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--functions", type=int, default=2000)
    p.add_argument("--viewpoints", default=None,
                   help="override viewpoints, e.g. '30,30;45,22.5'")
    p.add_argument("--grids", default=None,
                   help="override grids, e.g. '20,28,u37,20r30' (default: full recipe)")
    p.add_argument("--ranges", default=None,
                   help="train/val/test id ranges as t0,t1,v0,v1,s0,s1")
    p.add_argument("--threads", type=int, default=None)


def cmd_gen_functions(args) -> int:
    cfg = _config_from_args(args)
    os.makedirs(os.path.join(args.out, "functions"), exist_ok=True)
    _echo_config(cfg, args.out)
    jobs = [j for j in plan_dataset(cfg) if j.kind == "function"]
    written = 0
    for j in jobs:
        target = os.path.join(args.out, j.path)
        if not os.path.exists(target):
            save_function(synth_function(cfg.master_seed, j.function_id), target)
            written += 1
    frag = _manifest_from_plan(cfg, jobs)
    frag.save(os.path.join(args.out, "functions.jsonl"))
    print(f"generated {written} function files ({len(jobs) - written} already present)")
    return 0


def _echo_config(cfg: BuildConfig, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="ascii") as fh:
        json.dump(cfg.content_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_build(args) -> int:
    cfg = _config_from_args(args)
    jobs = plan_dataset(cfg)
    counts = Counter(j.kind for j in jobs)
    print(f"plan: {counts['function']} functions, {counts['depth']} depth maps, "
          f"{counts['surface']} surface renders (seed {cfg.master_seed}, "
          f"hash {cfg.config_hash()})")
    if args.dry_run:
        return 0
    manifest, report = build(cfg, args.out)
    print(f"built: {report.executed} rendered, {report.skipped} already present")
    if report.failures:
        for path, err in report.failures[:20]:
            print(f"FAILED {path}: {err}", file=sys.stderr)
        print(f"{len(report.failures)} job(s) failed", file=sys.stderr)
        return 1
    print(f"manifest: {os.path.join(args.out, Manifest.MANIFEST_NAME)} "
          f"({len(manifest.records)} records)")
    return 0


def cmd_eval(args) -> int:
    from . import metrics

    manifest = Manifest.load(args.manifest)
    manifest.validate()
    tags = [t.strip() for t in args.tags.split(",") if t.strip()]
    root = os.path.dirname(os.path.abspath(args.manifest))
    reports, problems = metrics.evaluate(
        args.pred, manifest, tags, size=args.size, seed=args.seed, dataset_root=root
    )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "eval_config.json"), "w") as fh:
        json.dump({"manifest": os.path.abspath(args.manifest), "pred": args.pred,
                   "tags": tags, "size": args.size, "seed": args.seed}, fh, indent=2)
        fh.write("\n")
    if reports:
        paths = metrics.write_report_files(reports, args.out)
        if args.json:
            print(json.dumps([
                {"subset": r.subset, "count": r.count, "mean_msre": r.mean_msre}
                for r in reports
            ]))
        else:
            print(metrics.render_table(reports))
            print("wrote: " + ", ".join(paths))
    for p in problems:
        print(f"subset {p.subset}: {len(p.missing)} missing prediction(s), skipped; "
              f"first: {p.missing[0]}", file=sys.stderr)
    return 1 if problems else 0


def cmd_preprocess(args) -> int:
    gray = imgio.read_grayscale(args.input)
    binary = binarize_real_plot(
        gray, mode=args.mode, threshold=args.threshold
    )
    imgio.write_surface_png(binary, args.out)
    print(f"wrote {args.out} (white fraction {binary.mean():.4f})")
    return 0


def cmd_inspect(args) -> int:
    manifest = Manifest.load(args.manifest)
    try:
        manifest.validate()
        valid = True
        problem = None
    except ManifestError as exc:
        valid = False
        problem = str(exc)
    kinds = Counter(r["kind"] for r in manifest.records)
    tag_counts = Counter(t for r in manifest.surface_records() for t in r["tags"])
    info = {
        "master_seed": manifest.master_seed,
        "config_hash": manifest.config_hash,
        "functions": manifest.functions,
        "ranges": manifest.ranges,
        "records": dict(kinds),
        "tags": dict(sorted(tag_counts.items())),
        "valid": valid,
    }
    if problem:
        info["problem"] = problem
    if args.json:
        print(json.dumps(info, indent=2, sort_keys=True))
    else:
        print(f"seed {manifest.master_seed}  hash {manifest.config_hash}  "
              f"functions {manifest.functions}  ranges {manifest.ranges}")
        print("records: " + ", ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
        for tag, n in sorted(tag_counts.items()):
            print(f"  {tag:24s} {n}")
        print("valid" if valid else f"INVALID: {problem}")
    return 0 if valid else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="surfacegrid",
        description="Generate and evaluate grid-marked surface / depth-map datasets.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-functions", help="synthesize function parameter files")
    _add_build_flags(p)
    p.set_defaults(func=cmd_gen_functions)

    p = sub.add_parser("build", help="plan and render the dataset")
    _add_build_flags(p)
    p.add_argument("--dry-run", action="store_true", help="print the plan and exit")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="score predicted depth maps against test subsets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", required=True, help="directory of predicted depth images")
    p.add_argument("--tags", required=True, help="comma-separated test sets")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("preprocess", help="binarize a scanned/published plot image")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("auto_threshold", "fixed"), default="auto_threshold")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("inspect", help="print manifest statistics and validate it")
    p.add_argument("manifest")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
