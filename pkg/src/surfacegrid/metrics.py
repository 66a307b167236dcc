"""Scoring of predicted depth maps, result tables, and the early-stop monitor.

MSRE here is the ratio-of-sums form

    msre(pred, truth) = sum((pred - truth)^2) / sum(truth^2)

over all pixels of the decoded [0, 1] images, background included.  This
is a documented interpretation: the metric's exact normalization is not
pinned down by its name, and alternative per-pixel forms blow up on the
zero-valued background.  The ratio form is dimensionless and invariant
under scaling both images by the same factor.

Per-subset means are arithmetic means of the per-image values, accumulated
in record-path order so reports are bit-reproducible.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from .dataset import Manifest, make_test_set
from .imgio import read_depth_png


class MetricError(ValueError):
    pass


def msre(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    denom = float(np.sum(truth * truth))
    if denom == 0.0:
        raise MetricError("undefined metric: truth is all background")
    return float(np.sum((pred - truth) ** 2)) / denom


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(np.abs(pred - truth)))


@dataclass(frozen=True)
class EvalReport:
    subset: str
    count: int
    per_image: tuple[tuple[str, float], ...]  # (surface path, msre), path-sorted
    mean_msre: float
    config_hash: str


@dataclass(frozen=True)
class StopDecision:
    action: str  # "continue" | "stop"
    rollback_epoch: int


def early_stop(history, patience: int = 50) -> StopDecision:
    """Stop once validation error has risen strictly for `patience` epochs.

    The rollback epoch is the (0-based) index of the history minimum;
    plateaus and any decrease reset the run of increases.
    """
    hist = list(history)
    if not hist:
        raise MetricError("empty validation history")
    best = int(np.argmin(hist))
    if len(hist) >= patience + 1:
        tail = hist[-(patience + 1):]
        if all(b > a for a, b in zip(tail, tail[1:])):
            return StopDecision("stop", best)
    return StopDecision("continue", best)


def relative_improvement(base: EvalReport, new: EvalReport) -> float:
    """Percent MSRE improvement of `new` over `base` (positive is better)."""
    if base.subset != new.subset:
        raise MetricError(f"subset mismatch: {base.subset} vs {new.subset}")
    if base.mean_msre == 0.0:
        raise MetricError("base mean MSRE is zero")
    return 100.0 * (base.mean_msre - new.mean_msre) / base.mean_msre


@dataclass(frozen=True)
class MissingPredictions:
    subset: str
    missing: tuple[str, ...]


def evaluate(pred_dir, manifest: Manifest, tags, *, size: int = 100,
             seed: int = 0, dataset_root=None):
    """Score one prediction directory against the manifest's test subsets.

    Predictions are image files named after the surface render they answer
    (the model's input), one per pair, in DepthMap file format.  Returns
    (reports, problems): a subset with any missing prediction is skipped
    and listed in `problems` instead.
    """
    pred_dir = os.fspath(pred_dir)
    reports: list[EvalReport] = []
    problems: list[MissingPredictions] = []
    truth_cache: dict[str, np.ndarray] = {}
    for tag in tags:
        pairs = make_test_set(manifest, tag, size=size, seed=seed)
        missing = tuple(
            os.path.basename(sp) for sp, _ in pairs
            if not os.path.exists(os.path.join(pred_dir, os.path.basename(sp)))
        )
        if missing:
            problems.append(MissingPredictions(tag, missing))
            continue
        per_image = []
        for surf_path, depth_path in sorted(pairs):
            if depth_path not in truth_cache:
                root = dataset_root or "."
                truth_cache[depth_path] = read_depth_png(os.path.join(root, depth_path))
            pred = read_depth_png(os.path.join(pred_dir, os.path.basename(surf_path)))
            per_image.append((surf_path, msre(pred, truth_cache[depth_path])))
        mean = sum(v for _, v in per_image) / len(per_image)
        reports.append(EvalReport(
            subset=tag,
            count=len(per_image),
            per_image=tuple(per_image),
            mean_msre=mean,
            config_hash=manifest.config_hash,
        ))
    return reports, problems


# --- report rendering --------------------------------------------------------

def render_table(reports) -> str:
    """Single-model results, one row per test subset, MSRE x 10^-2."""
    lines = [f"{'Test Set':<16s} {'MSRE (x1e-2)':>12s} {'images':>7s}"]
    lines.append("-" * len(lines[0]))
    for r in reports:
        lines.append(f"{r.subset:<16s} {100.0 * r.mean_msre:>12.3f} {r.count:>7d}")
    return "\n".join(lines)


def render_matrix(rows: dict) -> str:
    """Variant-by-test-set grid (training variant down, test set across)."""
    cols: list[str] = []
    for reports in rows.values():
        for r in reports:
            if r.subset not in cols:
                cols.append(r.subset)
    head = f"{'Training \\ Test':<16s}" + "".join(f"{c:>14s}" for c in cols)
    lines = [head, "-" * len(head)]
    for variant, reports in rows.items():
        by = {r.subset: r for r in reports}
        cells = "".join(
            f"{100.0 * by[c].mean_msre:>14.3f}" if c in by else f"{'-':>14s}"
            for c in cols
        )
        lines.append(f"{variant:<16s}" + cells)
    return "\n".join(lines)


def reports_to_csv(reports) -> str:
    """Machine-readable rows; floats use repr so parsing them is lossless."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subset", "count", "mean_msre", "config_hash"])
    for r in reports:
        w.writerow([r.subset, r.count, repr(r.mean_msre), r.config_hash])
    return buf.getvalue()


def parse_reports_csv(text: str) -> list[tuple[str, int, float, str]]:
    rows = list(csv.reader(io.StringIO(text)))
    return [(s, int(c), float(m), h) for s, c, m, h in rows[1:]]


def per_image_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subset", "surface_path", "msre"])
    for r in reports:
        for path, val in r.per_image:
            w.writerow([r.subset, path, repr(val)])
    return buf.getvalue()


def write_report_files(reports, out_dir, *, stem: str = "report") -> list[str]:
    """Write the text table, CSV records, and a bar-chart figure."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    paths = []

    txt = os.path.join(out_dir, f"{stem}.txt")
    with open(txt, "w") as fh:
        fh.write(render_table(reports) + "\n")
    paths.append(txt)

    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w") as fh:
        fh.write(reports_to_csv(reports))
    paths.append(csv_path)

    per_path = os.path.join(out_dir, f"{stem}_per_image.csv")
    with open(per_path, "w") as fh:
        fh.write(per_image_csv(reports))
    paths.append(per_path)

    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(reports) + 1.5), 3.2))
    names = [r.subset for r in reports]
    vals = [100.0 * r.mean_msre for r in reports]
    ax.bar(names, vals, color="#4878a8")
    ax.set_ylabel(r"MSRE ($\times 10^{-2}$)")
    ax.set_title("Reconstruction error by test set")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig_path = os.path.join(out_dir, f"{stem}.png")
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    paths.append(fig_path)
    return paths
