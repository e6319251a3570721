"""Every evaluation formula the engine reports: map-and-locate semantic
scores (label transfer + completeness), monocular depth errors, relative
pose accuracies, and zero-shot pixel classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTranslation,
    DimensionMismatch,
    EmptyCloud,
    NoValidPixels,
)
from .geometry import LabeledCloud, RigidTransform, rotation_geodesic, translation_angle
from .nnindex import PointIndex

DEFAULT_TAU = 0.10
POSE_THRESHOLDS = (5, 10, 15, 30)


@dataclass(frozen=True)
class MapLocateScores:
    """Semantic and completeness scores for one aligned prediction cloud.

    miou/acc come from nearest-neighbor label transfer onto the ground
    truth; mcomp/mdcomp are per-class fractions of prediction-to-GT
    nearest-neighbor distances under tau (mdcomp thresholds the per-class
    median instead). Raw pooled distances are kept for auditing. When no
    class appears in both clouds, completeness is reported as 0 with
    no_shared_classes set and NaN raw distances.
    """

    miou: float
    acc: float
    mcomp: float
    mdcomp: float
    per_class_iou: dict[int, float] = field(default_factory=dict)
    raw_mean_nn_distance: float = 0.0
    raw_median_nn_distance: float = 0.0
    no_shared_classes: bool = False


@dataclass(frozen=True)
class DepthScores:
    absrel: float
    delta_125: float


@dataclass(frozen=True)
class PoseScores:
    rra_at: dict[int, float]
    rta_at: dict[int, float]
    maa30: float


@dataclass(frozen=True)
class ClassEmbeddings:
    """L class names with matching L x D unit-norm embedding rows.

    Row i holds the embedding of class id i + 1; id 0 stays reserved for
    void so it can never win an argmax.
    """

    names: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2:
            raise DimensionMismatch(f"embeddings must be LxD, got {vecs.shape}")
        names = tuple(self.names)
        if names and len(names) != len(vecs):
            raise DimensionMismatch(f"{len(names)} names but {len(vecs)} embedding rows")
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"embedding row {worst} has norm {norms[worst]:.8f}, expected 1")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "vectors", vecs)

    @property
    def num_classes(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _transfer_labels(pred: LabeledCloud, gt: LabeledCloud) -> np.ndarray:
    """Label of the nearest non-void predicted point, per GT point."""
    keep = pred.labels != 0
    if not np.any(keep):
        raise EmptyCloud("prediction has no non-void points")
    index = PointIndex(pred.points[keep])
    idx, _ = index.nearest_batch(gt.points)
    return pred.labels[keep][idx]


def _confusion_iou(gt_labels, transferred, classes) -> dict[int, float]:
    iou = {}
    for c in classes:
        gt_c = gt_labels == c
        tr_c = transferred == c
        tp = int(np.count_nonzero(gt_c & tr_c))
        fp = int(np.count_nonzero(~gt_c & tr_c))
        fn = int(np.count_nonzero(gt_c & ~tr_c))
        iou[int(c)] = tp / (tp + fp + fn)
    return iou


def semantic_scores(
    pred: LabeledCloud,
    gt: LabeledCloud,
    tau: float = DEFAULT_TAU,
    completeness_direction: str = "pred_to_gt",
) -> MapLocateScores:
    """Score an aligned prediction cloud against ground truth.

    Label transfer: each GT point takes the label of its nearest non-void
    predicted point; acc is the matching fraction and IoU comes from the
    transferred-label confusion, averaged over classes present in the GT.

    Completeness: per GT class, both clouds are filtered to that class and
    nearest-neighbor distances are computed in `completeness_direction`
    (default prediction-to-GT); mcomp averages the fraction of distances
    under tau, mdcomp averages the indicator median(distance) < tau. A GT
    class with no predicted points contributes 0 to both.
    """
    if completeness_direction not in ("pred_to_gt", "gt_to_pred"):
        raise ValueError(f"unknown completeness direction {completeness_direction!r}")
    if len(pred) == 0:
        raise EmptyCloud("prediction cloud is empty")
    gt_keep = gt.labels != 0
    gt_points = gt.points[gt_keep]
    gt_labels = gt.labels[gt_keep]
    if len(gt_points) == 0:
        raise EmptyCloud("ground truth cloud has no non-void points")

    gt_cloud = LabeledCloud(gt_points, gt_labels)
    transferred = _transfer_labels(pred, gt_cloud)
    acc = float(np.mean(transferred == gt_labels))
    classes = np.unique(gt_labels)
    per_class_iou = _confusion_iou(gt_labels, transferred, classes)
    miou = float(np.mean([per_class_iou[int(c)] for c in classes]))

    fractions = []
    medians_under = []
    pooled = []
    shared = 0
    for c in classes:
        gt_c = gt_points[gt_labels == c]
        pred_c = pred.points[pred.labels == c]
        if len(pred_c) == 0:
            fractions.append(0.0)
            medians_under.append(0.0)
            continue
        shared += 1
        if completeness_direction == "pred_to_gt":
            _, dists = PointIndex(gt_c).nearest_batch(pred_c)
        else:
            _, dists = PointIndex(pred_c).nearest_batch(gt_c)
        fractions.append(float(np.mean(dists < tau)))
        medians_under.append(1.0 if float(np.median(dists)) < tau else 0.0)
        pooled.append(dists)

    if shared == 0:
        return MapLocateScores(
            miou=miou,
            acc=acc,
            mcomp=0.0,
            mdcomp=0.0,
            per_class_iou=per_class_iou,
            raw_mean_nn_distance=math.nan,
            raw_median_nn_distance=math.nan,
            no_shared_classes=True,
        )

    all_dists = np.concatenate(pooled)
    return MapLocateScores(
        miou=miou,
        acc=acc,
        mcomp=float(np.mean(fractions)),
        mdcomp=float(np.mean(medians_under)),
        per_class_iou=per_class_iou,
        raw_mean_nn_distance=float(np.mean(all_dists)),
        raw_median_nn_distance=float(np.median(all_dists)),
    )


def depth_scores(pred_depth, gt_depth, scale_mode: str = "median") -> DepthScores:
    """AbsRel and the delta < 1.25 inlier fraction over jointly valid pixels,
    optionally median-scaling the prediction first."""
    if scale_mode not in ("median", "none"):
        raise ValueError(f"unknown scale mode {scale_mode!r}")
    pred = np.asarray(pred_depth, dtype=np.float64)
    gt = np.asarray(gt_depth, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"depth grids {pred.shape} vs {gt.shape}")
    valid = (gt > 0) & (pred > 0)
    if not np.any(valid):
        raise NoValidPixels("no pixel has both gt > 0 and pred > 0")
    y = gt[valid]
    yhat = pred[valid]
    if scale_mode == "median":
        yhat = yhat * float(np.median(y / yhat))
    absrel = float(np.mean(np.abs(y - yhat) / y))
    ratio = np.maximum(yhat / y, y / yhat)
    delta = float(np.mean(ratio < 1.25))
    return DepthScores(absrel=absrel, delta_125=delta)


def _pair_errors_deg(pairs) -> tuple[np.ndarray, np.ndarray]:
    rot = np.empty(len(pairs))
    trans = np.empty(len(pairs))
    for i, (gt_rel, pred_rel) in enumerate(pairs):
        rot[i] = math.degrees(rotation_geodesic(gt_rel.rotation, pred_rel.rotation))
        try:
            ang = translation_angle(gt_rel.translation, pred_rel.translation)
        except DegenerateTranslation:
            # Near-zero baselines have no direction; count them as failures.
            ang = math.pi
        trans[i] = math.degrees(ang)
    return rot, trans


def pose_scores(pairs, thresholds=POSE_THRESHOLDS) -> PoseScores:
    """Relative rotation/translation accuracies at the given degree
    thresholds plus mAA@30, from (gt, predicted) relative-pose pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCloud("no pose pairs to score")
    rot, trans = _pair_errors_deg(pairs)
    rra = {int(t): float(np.mean(rot < t)) for t in thresholds}
    rta = {int(t): float(np.mean(trans < t)) for t in thresholds}
    maa = float(
        np.mean([min(float(np.mean(rot < t)), float(np.mean(trans < t))) for t in range(1, 31)])
    )
    return PoseScores(rra_at=rra, rta_at=rta, maa30=maa)


def relative_pose_pairs(gt_poses, pred_poses) -> list[tuple[RigidTransform, RigidTransform]]:
    """All unordered frame pairs (i < j) as (gt, predicted) relative poses."""
    if len(gt_poses) != len(pred_poses):
        raise DimensionMismatch(f"{len(gt_poses)} gt poses vs {len(pred_poses)} predicted")
    from .geometry import relative_pose

    out = []
    for i in range(len(gt_poses)):
        for j in range(i + 1, len(gt_poses)):
            out.append(
                (relative_pose(gt_poses[i], gt_poses[j]), relative_pose(pred_poses[i], pred_poses[j]))
            )
    return out


def classify_pixels(features, classes: ClassEmbeddings) -> np.ndarray:
    """Assign each pixel the class id (row + 1) with the highest cosine
    similarity to its feature; zero-norm features become void (0), exact
    ties go to the smallest class index."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3:
        raise DimensionMismatch(f"features must be HxWxD, got {feats.shape}")
    if feats.shape[2] != classes.dim:
        raise DimensionMismatch(
            f"feature dim {feats.shape[2]} does not match embeddings dim {classes.dim}"
        )
    # Class rows are unit-norm, so the argmax of the dot product equals the
    # argmax of the cosine; np.argmax takes the first (smallest) on ties.
    scores = feats @ classes.vectors.T
    labels = (np.argmax(scores, axis=2) + 1).astype(np.uint16)
    zero = np.linalg.norm(feats, axis=2) == 0
    labels[zero] = 0
    return labels


def segmentation_miou(pred_labels, gt_labels, num_classes: int) -> tuple[float, dict[int, float]]:
    """Confusion-matrix mIoU over classes present in the GT grid; void GT
    pixels are excluded entirely."""
    pred = np.asarray(pred_labels, dtype=np.int64)
    gt = np.asarray(gt_labels, dtype=np.int64)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"label grids {pred.shape} vs {gt.shape}")
    if np.any(gt < 0) or np.any(pred < 0) or gt.max(initial=0) > num_classes or pred.max(initial=0) > num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes}]")
    valid = gt != 0
    if not np.any(valid):
        raise NoValidPixels("ground truth grid is entirely void")
    gt_v = gt[valid]
    pred_v = pred[valid]
    classes = np.unique(gt_v)
    per_class = _confusion_iou(gt_v, pred_v, classes)
    return float(np.mean([per_class[int(c)] for c in classes])), per_class


def resize_labels_nearest(labels, out_shape) -> np.ndarray:
    """Nearest-neighbor resize for categorical label grids."""
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise DimensionMismatch(f"labels must be HxW, got {lab.shape}")
    h, w = lab.shape
    oh, ow = out_shape
    rows = np.minimum((np.arange(oh) + 0.5) * h / oh, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(ow) + 0.5) * w / ow, w - 1).astype(np.int64)
    return lab[rows[:, None], cols[None, :]]
