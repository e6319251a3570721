"""Report assembly and emission: JSON (deterministic, schema-versioned),
CSV summaries (one row per group), and rendered figures alongside them.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

# Keys that are structural rather than metric values.
_ROW_META = ("scene", "group", "views", "frames", "error")


def _mean_checked(values: list[float]) -> float:
    """Arithmetic mean, cross-checked against numpy on emission."""
    mean = sum(values) / len(values)
    ref = float(np.mean(values))
    if not (math.isnan(mean) and math.isnan(ref)) and abs(mean - ref) > 1e-12 * max(
        1.0, abs(ref)
    ):
        raise AssertionError(f"aggregate mean check failed: {mean} vs {ref}")
    return mean


def _numeric_items(scores: dict) -> dict[str, float]:
    out = {}
    for key, value in scores.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            continue
        out[key] = float(value)
    return out


def aggregate_rows(rows: list[dict]) -> dict:
    """Mean each numeric score over successful groups, per view count and
    overall. NaN values (undefined metrics) are left out of the mean; the
    contributing count is reported per bucket."""
    buckets: dict[str, list[dict]] = {}
    good = [r for r in rows if "error" not in r]
    for row in good:
        buckets.setdefault(str(row["views"]), []).append(row)
    result = {"by_views": {}, "overall": _aggregate_bucket(good)}
    for views in sorted(buckets):
        result["by_views"][views] = _aggregate_bucket(buckets[views])
    return result


def _aggregate_bucket(rows: list[dict]) -> dict:
    agg: dict[str, float] = {"group_count": len(rows)}
    if not rows:
        return agg
    keys = sorted({k for r in rows for k in _numeric_items(r["scores"])})
    for key in keys:
        values = [
            _numeric_items(r["scores"])[key]
            for r in rows
            if key in _numeric_items(r["scores"])
            and math.isfinite(_numeric_items(r["scores"])[key])
        ]
        if values:
            agg[key] = _mean_checked(values)
    return agg


def build_report(command: str, bundle_root, config: dict, rows: list[dict],
                 wall_seconds: float, tool_version: str) -> dict:
    failures = sum(1 for r in rows if "error" in r)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "maploc", "version": tool_version},
        "command": command,
        "bundle": str(bundle_root),
        "config": config,
        "per_group": rows,
        "aggregate": aggregate_rows(rows),
        "failures": failures,
        "timing": {"wall_seconds": wall_seconds},
    }


def _sanitize(obj):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_sanitize(report), f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(rows: list[dict], path) -> None:
    """One row per (group, view count); metric columns sorted by name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metric_keys = sorted(
        {k for r in rows if "scores" in r for k in _numeric_items(r["scores"])}
    )
    header = ["scene", "group", "views", *metric_keys, "error"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            scores = _numeric_items(row.get("scores", {}))
            record = [row["scene"], row["group"], row["views"]]
            for key in metric_keys:
                value = scores.get(key)
                record.append(
                    "" if value is None or not math.isfinite(value) else repr(value)
                )
            record.append(row.get("error", ""))
            writer.writerow(record)


def render_eval_figures(report: dict, out_stem: Path, metrics: list[str]) -> list[Path]:
    """Bar chart of aggregate metrics per view count, written next to the
    CSV/JSON outputs. Returns the created file paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_views = report["aggregate"]["by_views"]
    views = sorted(by_views)
    present = [m for m in metrics if any(m in by_views[v] for v in views)]
    out = []
    if not views or not present:
        return out
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(present)
    xs = np.arange(len(views))
    for k, metric in enumerate(present):
        vals = [by_views[v].get(metric, float("nan")) for v in views]
        ax.bar(xs + k * width, vals, width=width, label=metric)
    ax.set_xticks(xs + width * (len(present) - 1) / 2)
    ax.set_xticklabels([f"{v} views" for v in views])
    ax.set_ylabel("aggregate value")
    ax.set_title(report["command"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_stem.with_name(out_stem.name + "_by_views.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    out.append(path)
    return out


def render_stats_figures(pairs_by_views: dict[int, list[tuple[float, float]]],
                         out_stem: Path) -> list[Path]:
    """Histograms of camera translation and rotation differences per view
    count, mirroring the camera-distribution summary plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = []
    for axis_idx, (name, unit) in enumerate(
        (("translation", "m"), ("rotation", "rad"))
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for views in sorted(pairs_by_views):
            values = [pair[axis_idx] for pair in pairs_by_views[views]]
            if values:
                _, edges = _histogram(values, 12)
                ax.hist(values, bins=edges, alpha=0.5, label=f"{views} views")
        ax.set_xlabel(f"camera {name} difference ({unit})")
        ax.set_ylabel("pair count")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_stem.with_name(f"{out_stem.name}_{name}_hist.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        out.append(path)
    return out


def _histogram(values, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """np.histogram that tolerates near-degenerate value ranges.

    numpy refuses spans too small to cut into `bins` distinct edges (a few
    ulp apart, as symmetric camera rigs produce); widen those to a unit
    window, the same as numpy's own handling of an exactly constant sample.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < max(abs(lo), abs(hi), 1.0) * 1e-9 * bins:
        mid = 0.5 * (lo + hi)
        lo, hi = mid - 0.5, mid + 0.5
    return np.histogram(values, bins=bins, range=(lo, hi))


def write_stats_csv(pairs_by_views: dict[int, list[tuple[float, float]]], path,
                    bins: int = 12) -> None:
    """Histogram CSV: one row per (view count, quantity, bin)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["views", "quantity", "bin_lo", "bin_hi", "count"])
        for views in sorted(pairs_by_views):
            pairs = pairs_by_views[views]
            for idx, quantity in ((0, "d_translation"), (1, "d_rotation")):
                values = np.array([p[idx] for p in pairs], dtype=np.float64)
                if len(values) == 0:
                    continue
                counts, edges = _histogram(values, bins)
                for b in range(bins):
                    writer.writerow(
                        [views, quantity, repr(float(edges[b])),
                         repr(float(edges[b + 1])), int(counts[b])]
                    )
