"""Bundle-level evaluation: per-group scoring pipelines, configuration,
thread-pooled orchestration with manifest-order reduction, and the curate
workflow that turns raw per-scene scans into an evaluation bundle.
"""

from __future__ import annotations

import dataclasses
import json
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import pose_from_pointmaps, reference_scale, umeyama
from .curation import LabelMapping, SceneFrame, build_groups, camera_stats, map_labels
from .errors import MaplocError, MissingFile, ShapeMismatch
from .geometry import (
    Intrinsics,
    LabeledCloud,
    Pointmap,
    RigidTransform,
    SimilarityTransform,
    flatten,
    relative_pose,
    unproject,
)
from .metrics import (
    ClassEmbeddings,
    classify_pixels,
    depth_scores,
    pose_scores,
    semantic_scores,
)
from .report import build_report, write_csv, write_json, write_stats_csv
from .tensorio import (
    MANDATORY_FRAME_FILES,
    OPTIONAL_FRAME_FILES,
    Bundle,
    FrameEntry,
    load_bundle,
    read_tensor,
    write_manifest,
    write_tensor,
)


@dataclass(frozen=True)
class EvalConfig:
    """Every underdetermined evaluation choice, surfaced as a knob."""

    tau: float = 0.10
    conf_min: float = 0.0
    min_overlap: float = 0.3
    scale_mode: str = "median"  # depth eval: median | none
    completeness_direction: str = "pred_to_gt"  # | gt_to_pred
    alignment_mode: str = "median_scale"  # | umeyama
    alignment_scope: str = "group"  # | scene
    seed: int = 0
    threads: int = 1
    sizes: tuple[int, ...] = (2, 3, 4)
    groups_per_size: int = 2
    label_map: str | None = None
    pose_thresholds: tuple[int, ...] = (5, 10, 15, 30)

    @classmethod
    def from_file(cls, path) -> "EvalConfig":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("sizes", "pose_thresholds"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["sizes"] = list(self.sizes)
        doc["pose_thresholds"] = list(self.pose_thresholds)
        # The thread count is an execution detail like wall time: it cannot
        # change any score, so reports stay byte-identical across it.
        doc.pop("threads")
        return doc


@dataclass
class FrameData:
    """All tensors of one frame, shape-validated."""

    frame_id: str
    depth: np.ndarray
    pose: RigidTransform
    intrinsics: Intrinsics
    labels: np.ndarray
    pred_pointmap: np.ndarray | None = None
    pred_pointmap_self: np.ndarray | None = None
    pred_conf: np.ndarray | None = None
    pred_feat: np.ndarray | None = None
    pred_depth: np.ndarray | None = None
    pred_labels: np.ndarray | None = None

    @property
    def masked_labels(self) -> np.ndarray:
        """GT labels with invalid-depth pixels forced to void."""
        return np.where(self.depth > 0, self.labels, 0)


def _optional(entry: FrameEntry, name: str):
    return entry.load(name) if entry.has(name) else None


def load_frame(entry: FrameEntry) -> FrameData:
    depth = entry.load("gt_depth.mltf")
    if depth.ndim != 2:
        raise ShapeMismatch(f"{entry.frame_id}: gt_depth must be HxW, got {depth.shape}")
    hw = depth.shape
    pose = RigidTransform.from_matrix(entry.load("gt_pose.mltf"))
    intrinsics = Intrinsics.from_matrix(entry.load("intrinsics.mltf"))
    labels = entry.load("gt_labels.mltf")
    if labels.shape != hw:
        raise ShapeMismatch(f"{entry.frame_id}: gt_labels {labels.shape} vs depth {hw}")

    fd = FrameData(entry.frame_id, depth.astype(np.float64), pose, intrinsics,
                   labels.astype(np.int64))
    fd.pred_pointmap = _optional(entry, "pred_pointmap.mltf")
    fd.pred_pointmap_self = _optional(entry, "pred_pointmap_self.mltf")
    fd.pred_conf = _optional(entry, "pred_conf.mltf")
    fd.pred_feat = _optional(entry, "pred_feat.mltf")
    fd.pred_depth = _optional(entry, "pred_depth.mltf")
    fd.pred_labels = _optional(entry, "pred_labels.mltf")

    for name, arr, shape in (
        ("pred_pointmap", fd.pred_pointmap, (*hw, 3)),
        ("pred_pointmap_self", fd.pred_pointmap_self, (*hw, 3)),
        ("pred_conf", fd.pred_conf, hw),
        ("pred_depth", fd.pred_depth, hw),
        ("pred_labels", fd.pred_labels, hw),
    ):
        if arr is not None and arr.shape != shape:
            raise ShapeMismatch(f"{entry.frame_id}: {name} {arr.shape}, expected {shape}")
    if fd.pred_feat is not None and fd.pred_feat.shape[:2] != hw:
        raise ShapeMismatch(
            f"{entry.frame_id}: pred_feat {fd.pred_feat.shape} does not cover {hw}"
        )
    return fd


def _load_embeddings(bundle: Bundle) -> ClassEmbeddings | None:
    if not bundle.has_class_embeddings():
        return None
    vectors = bundle.load_class_embeddings()
    names = bundle.class_names or tuple(f"class{i + 1}" for i in range(len(vectors)))
    return ClassEmbeddings(names=names, vectors=vectors)


def _pred_label_grid(fd: FrameData, embeddings: ClassEmbeddings | None) -> np.ndarray:
    if fd.pred_labels is not None:
        return fd.pred_labels
    if fd.pred_feat is not None and embeddings is not None:
        return classify_pixels(fd.pred_feat, embeddings)
    raise MissingFile([f"{fd.frame_id}/pred_labels.mltf (or pred_feat.mltf plus "
                       f"classes/embeddings.mltf)"])


def _require_pointmap(fd: FrameData) -> Pointmap:
    if fd.pred_pointmap is None:
        raise MissingFile([f"{fd.frame_id}/pred_pointmap.mltf"])
    return Pointmap(points=fd.pred_pointmap, frame="reference", confidence=fd.pred_conf)


def group_transform(frames: list[FrameData], reference_id: str,
                    config: EvalConfig) -> SimilarityTransform:
    """World-alignment transform for a group from its reference frame: either
    median depth-ratio scaling or a full similarity fit, composed with the
    reference ground-truth pose."""
    ref = next(fd for fd in frames if fd.frame_id == reference_id)
    pm = _require_pointmap(ref)
    if config.alignment_mode == "median_scale":
        s = reference_scale(pm, ref.depth)
        return SimilarityTransform(s, ref.pose)
    if config.alignment_mode == "umeyama":
        gt_cam = unproject(ref.depth, ref.intrinsics)
        w = gt_cam.confidence.reshape(-1).copy()
        if pm.confidence is not None:
            w *= pm.confidence.reshape(-1)
        fit = umeyama(pm.points.reshape(-1, 3), gt_cam.points.reshape(-1, 3),
                      weights=w, with_scale=True)
        return SimilarityTransform(1.0, ref.pose).compose(fit.transform)
    raise ValueError(f"unknown alignment mode {config.alignment_mode!r}")


def _gt_cloud(frames: list[FrameData]) -> LabeledCloud:
    parts_p, parts_l = [], []
    for fd in frames:
        pm = unproject(fd.depth, fd.intrinsics)
        world = Pointmap(points=fd.pose.apply(pm.points), frame="world",
                         confidence=pm.confidence)
        cloud = flatten(world, fd.masked_labels, conf_min=0.0)
        parts_p.append(cloud.points)
        parts_l.append(cloud.labels)
    return LabeledCloud(np.concatenate(parts_p), np.concatenate(parts_l))


def _pred_cloud(frames: list[FrameData], T: SimilarityTransform,
                embeddings: ClassEmbeddings | None, config: EvalConfig) -> LabeledCloud:
    parts_p, parts_l = [], []
    for fd in frames:
        pm = _require_pointmap(fd)
        labels = _pred_label_grid(fd, embeddings)
        world = Pointmap(points=T.apply(pm.points), frame="world",
                         confidence=pm.confidence)
        cloud = flatten(world, labels, conf_min=config.conf_min)
        parts_p.append(cloud.points)
        parts_l.append(cloud.labels)
    return LabeledCloud(np.concatenate(parts_p), np.concatenate(parts_l))


def eval_maploc_group(frames: list[FrameData], reference_id: str, config: EvalConfig,
                      embeddings: ClassEmbeddings | None,
                      transform: SimilarityTransform | None = None) -> dict:
    T = transform or group_transform(frames, reference_id, config)
    pred = _pred_cloud(frames, T, embeddings, config)
    gt = _gt_cloud(frames)
    s = semantic_scores(pred, gt, tau=config.tau,
                        completeness_direction=config.completeness_direction)
    return {
        "miou": s.miou,
        "miou_pct": 100.0 * s.miou,
        "acc": s.acc,
        "acc_pct": 100.0 * s.acc,
        "mcomp": s.mcomp,
        "mdcomp": s.mdcomp,
        "raw_mean_nn_distance": s.raw_mean_nn_distance,
        "raw_median_nn_distance": s.raw_median_nn_distance,
        "no_shared_classes": s.no_shared_classes,
        "per_class_iou": {str(k): v for k, v in sorted(s.per_class_iou.items())},
    }


def eval_depth_group(frames: list[FrameData], config: EvalConfig) -> dict:
    absrels, deltas = [], []
    for fd in frames:
        if fd.pred_depth is None:
            continue
        ds = depth_scores(fd.pred_depth, fd.depth, scale_mode=config.scale_mode)
        absrels.append(ds.absrel)
        deltas.append(ds.delta_125)
    if not absrels:
        raise MissingFile([f"{fd.frame_id}/pred_depth.mltf" for fd in frames])
    absrel = float(np.mean(absrels))
    delta = float(np.mean(deltas))
    return {
        "absrel": absrel,
        "absrel_pct": 100.0 * absrel,
        "delta_125": delta,
        "delta_125_pct": 100.0 * delta,
        "frames_scored": float(len(absrels)),
    }


def _recovered_pose(fd: FrameData) -> RigidTransform:
    """Camera pose in the group reference frame, from the pair of predicted
    pointmaps (own frame vs reference frame). When no own-frame pointmap was
    exported, one is lifted from the predicted depth."""
    x_in_ref = _require_pointmap(fd)
    if fd.pred_pointmap_self is not None:
        x_self = Pointmap(points=fd.pred_pointmap_self, frame=fd.frame_id)
    elif fd.pred_depth is not None:
        x_self = unproject(fd.pred_depth, fd.intrinsics, frame=fd.frame_id)
    else:
        raise MissingFile([f"{fd.frame_id}/pred_pointmap_self.mltf",
                           f"{fd.frame_id}/pred_depth.mltf"])
    return pose_from_pointmaps(x_self, x_in_ref).transform.rigid


def eval_pose_group(frames: list[FrameData], config: EvalConfig) -> dict:
    recovered = [_recovered_pose(fd) for fd in frames]
    pairs = []
    for i in range(len(frames)):
        for j in range(i + 1, len(frames)):
            gt_rel = relative_pose(frames[i].pose, frames[j].pose)
            pred_rel = relative_pose(recovered[i], recovered[j])
            pairs.append((gt_rel, pred_rel))
    ps = pose_scores(pairs, thresholds=config.pose_thresholds)
    scores: dict = {"maa30": ps.maa30, "maa30_pct": 100.0 * ps.maa30,
                    "pair_count": float(len(pairs))}
    for t in config.pose_thresholds:
        scores[f"rra_at_{t}"] = ps.rra_at[t]
        scores[f"rra_at_{t}_pct"] = 100.0 * ps.rra_at[t]
        scores[f"rta_at_{t}"] = ps.rta_at[t]
        scores[f"rta_at_{t}_pct"] = 100.0 * ps.rta_at[t]
    return scores


def stats_group(frames: list[FrameData]) -> tuple[dict, list[tuple[float, float]]]:
    pose_pairs = []
    for i in range(len(frames)):
        for j in range(i + 1, len(frames)):
            pose_pairs.append((frames[i].pose, frames[j].pose))
    pairs = camera_stats(pose_pairs)
    d_trans = [p[0] for p in pairs]
    d_rot = [p[1] for p in pairs]
    scores = {
        "d_translation_mean": float(np.mean(d_trans)),
        "d_rotation_mean": float(np.mean(d_rot)),
        "pair_count": float(len(pairs)),
    }
    return scores, pairs


def align_group(frames: list[FrameData], reference_id: str,
                config: EvalConfig) -> tuple[dict, SimilarityTransform]:
    T = group_transform(frames, reference_id, config)
    scores = {"scale": T.scale}
    return scores, T


EVAL_METRIC_COLUMNS = {
    "eval-maploc": ["miou", "acc", "mcomp", "mdcomp"],
    "eval-depth": ["absrel", "delta_125"],
    "eval-pose": ["rra_at_15", "rta_at_15", "maa30"],
}


def run_eval(bundle_root, config: EvalConfig, command: str,
             out_json=None, out_csv=None, figures: bool = True) -> dict:
    """Evaluate every group of a bundle and emit the report artifacts.

    Groups are scored independently (optionally across a thread pool) and
    reduced in manifest order, so results do not depend on the thread count.
    A failing group becomes an annotated row instead of aborting the run.
    """
    t0 = time.perf_counter()
    bundle = load_bundle(bundle_root)
    embeddings = _load_embeddings(bundle) if command == "eval-maploc" else None
    tasks = list(bundle.iter_groups())

    scene_transforms: dict[str, object] = {}
    if command == "eval-maploc" and config.alignment_scope == "scene":
        for scene in bundle.scenes:
            if not scene.groups:
                continue
            group = scene.groups[0]
            try:
                frames = [load_frame(e) for e in group.frames]
                scene_transforms[scene.scene_id] = group_transform(
                    frames, group.reference_id, config)
            except Exception as exc:  # noqa: BLE001 - stored and reported per group
                scene_transforms[scene.scene_id] = exc

    def work(task) -> dict:
        scene, group = task
        row = {
            "scene": scene.scene_id,
            "group": group.group_id,
            "views": len(group.frames),
            "frames": [fr.frame_id for fr in group.frames],
        }
        try:
            frames = [load_frame(e) for e in group.frames]
            if command == "eval-maploc":
                transform = None
                if config.alignment_scope == "scene":
                    cached = scene_transforms[scene.scene_id]
                    if isinstance(cached, Exception):
                        raise cached
                    transform = cached
                row["scores"] = eval_maploc_group(
                    frames, group.reference_id, config, embeddings, transform)
            elif command == "eval-depth":
                row["scores"] = eval_depth_group(frames, config)
            elif command == "eval-pose":
                row["scores"] = eval_pose_group(frames, config)
            elif command == "stats":
                scores, pairs = stats_group(frames)
                row["scores"] = scores
                row["pairs"] = [[float(a), float(b)] for a, b in pairs]
            elif command == "align":
                scores, T = align_group(frames, group.reference_id, config)
                row["scores"] = scores
                row["transform"] = {
                    "scale": T.scale,
                    "rotation": T.rotation.tolist(),
                    "translation": T.translation.tolist(),
                }
            else:
                raise ValueError(f"unknown command {command!r}")
        except Exception as exc:  # noqa: BLE001 - annotated and counted
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(work, tasks))
    else:
        rows = [work(t) for t in tasks]

    report = build_report(command, bundle_root, config.to_dict(), rows,
                          wall_seconds=time.perf_counter() - t0,
                          tool_version=__version__)

    if out_json is not None:
        write_json(report, out_json)
    if out_csv is not None:
        if command == "stats":
            write_stats_csv(_pairs_by_views(rows), out_csv)
        else:
            write_csv(rows, out_csv)
    if figures and out_json is not None:
        _render_figures(command, report, rows, Path(out_json))
    return report


def _pairs_by_views(rows: list[dict]) -> dict[int, list[tuple[float, float]]]:
    out: dict[int, list[tuple[float, float]]] = {}
    for row in rows:
        if "pairs" in row:
            out.setdefault(int(row["views"]), []).extend(
                (float(a), float(b)) for a, b in row["pairs"])
    return out


def _render_figures(command: str, report: dict, rows: list[dict], out_json: Path) -> list:
    from .report import render_eval_figures, render_stats_figures

    stem = out_json.with_suffix("")
    if command == "stats":
        return render_stats_figures(_pairs_by_views(rows), stem)
    metrics = EVAL_METRIC_COLUMNS.get(command)
    if metrics:
        return render_eval_figures(report, stem, metrics)
    return []


def run_curate(scans_root, out_root, config: EvalConfig,
               out_stats=None) -> dict:
    """Select groups from raw per-scene scans and materialize them as a
    self-contained bundle (manifest + copied frame tensors), applying the
    NYU40 label mapping when one is configured."""
    scans_root = Path(scans_root)
    out_root = Path(out_root)
    mapping = LabelMapping.from_tsv(config.label_map) if config.label_map else None

    scene_dirs = sorted(d for d in scans_root.iterdir() if d.is_dir())
    manifest: dict = {"schema_version": 1, "scenes": []}
    stats: dict = {"scenes": []}
    for scene_dir in scene_dirs:
        frame_dirs = sorted(
            d for d in scene_dir.iterdir()
            if d.is_dir() and (d / "gt_depth.mltf").is_file()
        )
        if not frame_dirs:
            continue
        missing = [
            str(d.relative_to(scans_root) / name)
            for d in frame_dirs
            for name in MANDATORY_FRAME_FILES
            if not (d / name).is_file()
        ]
        if missing:
            raise MissingFile(sorted(missing))
        frames = [
            SceneFrame(
                frame_id=d.name,
                depth=read_tensor(d / "gt_depth.mltf").astype(np.float64),
                pose=RigidTransform.from_matrix(read_tensor(d / "gt_pose.mltf")),
                intrinsics=Intrinsics.from_matrix(read_tensor(d / "intrinsics.mltf")),
            )
            for d in frame_dirs
        ]
        specs = build_groups(frames, sizes=config.sizes,
                             groups_per_size=config.groups_per_size,
                             min_overlap=config.min_overlap, seed=config.seed,
                             scene_id=scene_dir.name)
        group_docs = []
        for gi, spec in enumerate(specs):
            gid = f"g{gi:03d}"
            for fid in spec.frame_ids:
                _copy_frame(scene_dir / fid, out_root / scene_dir.name / gid / fid, mapping)
            group_docs.append({"id": gid,
                               "frames": [{"id": fid} for fid in spec.frame_ids]})
            stats["scenes"].append({
                "scene": scene_dir.name,
                "group": gid,
                "views": len(spec.frame_ids),
                "min_pair_overlap": float(
                    min(min(spec.overlap[i, j], spec.overlap[j, i])
                        for i in range(len(spec.frame_ids))
                        for j in range(i + 1, len(spec.frame_ids)))
                ),
            })
        manifest["scenes"].append({"id": scene_dir.name, "groups": group_docs})

    write_manifest(out_root, manifest)
    if out_stats is not None:
        write_json({"schema_version": 1, "curation": stats}, out_stats)
    return manifest


def _copy_frame(src_dir: Path, dst_dir: Path, mapping: LabelMapping | None) -> None:
    dst_dir.mkdir(parents=True, exist_ok=True)
    for name in (*MANDATORY_FRAME_FILES, *OPTIONAL_FRAME_FILES):
        src = src_dir / name
        if not src.is_file():
            continue
        if name == "gt_labels.mltf" and mapping is not None:
            raw = read_tensor(src)
            write_tensor(dst_dir / name, map_labels(raw, mapping).astype(np.uint16))
        else:
            shutil.copyfile(src, dst_dir / name)
