"""Coordinate-frame reconciliation: reference-frame scaling of predictions,
weighted similarity registration, pose recovery from pointmap pairs, and
multi-view global alignment by alternating closed-form solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DisconnectedGraph,
    NoValidPixels,
    ShapeMismatch,
)
from .geometry import Pointmap, RigidTransform, SimilarityTransform

Z_EPS = 1e-12
MIN_VALID_PIXELS = 10


@dataclass(frozen=True)
class AlignmentResult:
    """A fitted transform plus fit diagnostics."""

    transform: SimilarityTransform
    residual_rms: float
    inlier_fraction: float


def reference_scale(pred: Pointmap, gt_depth) -> float:
    """Scale aligning predicted depths to ground truth for the reference view:
    the median of gt_depth / pred_z over jointly valid pixels."""
    gt = np.asarray(gt_depth, dtype=np.float64)
    if gt.shape != pred.points.shape[:2]:
        raise ShapeMismatch(f"gt depth {gt.shape} does not match grid {pred.points.shape[:2]}")
    pred_z = pred.points[..., 2]
    valid = (gt > 0) & (pred_z > Z_EPS)
    if int(valid.sum()) < MIN_VALID_PIXELS:
        raise NoValidPixels(f"only {int(valid.sum())} valid pixels for scale estimation")
    return float(np.median(gt[valid] / pred_z[valid]))


def align_to_world(pred: Pointmap, s: float, ref_pose: RigidTransform) -> Pointmap:
    """Map a reference-camera-frame pointmap into world coordinates:
    x -> R_ref (s x) + t_ref."""
    T = SimilarityTransform(float(s), ref_pose)
    return Pointmap(points=T.apply(pred.points), frame="world", confidence=pred.confidence)


def umeyama(src, dst, weights=None, with_scale: bool = True) -> AlignmentResult:
    """Weighted least-squares similarity (or rigid) registration src -> dst.

    Minimizes sum_i w_i ||s R src_i + t - dst_i||^2 in closed form via the
    SVD of the weighted cross-covariance, with the determinant-sign
    correction for reflections.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ShapeMismatch(f"src {src.shape} and dst {dst.shape} differ")
    n = len(src)
    if weights is None:
        w = np.ones(n, dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(w) != n:
            raise ShapeMismatch(f"{n} correspondences but {len(w)} weights")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
    if np.count_nonzero(w) < 3:
        raise DegenerateConfiguration("fewer than 3 effective correspondences")
    wsum = float(w.sum())
    wn = w / wsum

    mu_src = wn @ src
    mu_dst = wn @ dst
    x = src - mu_src
    y = dst - mu_dst
    cov = (y * wn[:, None]).T @ x
    var_src = float(np.sum(wn * np.sum(x * x, axis=1)))

    U, D, Vt = np.linalg.svd(cov)
    if D[0] <= 0 or D[1] <= 1e-9 * D[0]:
        raise DegenerateConfiguration("correspondences are coincident or collinear")
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = U @ np.diag(S) @ Vt
    s = float((D * S).sum() / var_src) if with_scale else 1.0
    if s <= 0:
        raise DegenerateConfiguration(f"recovered non-positive scale {s}")
    t = mu_dst - s * (R @ mu_src)

    transform = SimilarityTransform(s, RigidTransform(R, t))
    resid = transform.apply(src) - dst
    residual_rms = float(np.sqrt(np.sum(wn * np.sum(resid * resid, axis=1))))
    inlier_fraction = float(np.count_nonzero(w) / n)
    return AlignmentResult(transform, residual_rms, inlier_fraction)


def _pair_weights(x_self: Pointmap, x_in_ref: Pointmap, conf=None) -> np.ndarray:
    if conf is not None:
        w = np.asarray(conf, dtype=np.float64)
        if w.shape != x_self.points.shape[:2]:
            raise ShapeMismatch(f"weights {w.shape} do not match grid")
        return w.reshape(-1)
    if x_self.confidence is not None and x_in_ref.confidence is not None:
        return np.minimum(x_self.confidence, x_in_ref.confidence).reshape(-1)
    if x_self.confidence is not None:
        return x_self.confidence.reshape(-1).copy()
    if x_in_ref.confidence is not None:
        return x_in_ref.confidence.reshape(-1).copy()
    return np.ones(x_self.height * x_self.width, dtype=np.float64)


def pose_from_pointmaps(x_self: Pointmap, x_in_ref: Pointmap, conf=None) -> AlignmentResult:
    """Recover the rigid transform carrying a view's own-frame pointmap onto
    its reference-frame counterpart, weighting pixels by the minimum of the
    two confidences (or by an explicit weight grid)."""
    if x_self.points.shape != x_in_ref.points.shape:
        raise ShapeMismatch(
            f"pointmaps {x_self.points.shape} and {x_in_ref.points.shape} differ"
        )
    w = _pair_weights(x_self, x_in_ref, conf)
    return umeyama(
        x_self.points.reshape(-1, 3),
        x_in_ref.points.reshape(-1, 3),
        weights=w,
        with_scale=False,
    )


@dataclass(frozen=True)
class ViewEdge:
    """A pairwise prediction: view `src`'s pixels as seen in `ref`'s frame
    (x_in_ref) and in its own frame (x_self), with optional confidence."""

    ref: str
    src: str
    x_in_ref: Pointmap
    x_self: Pointmap
    conf: np.ndarray | None = None

    def weights(self) -> np.ndarray:
        return _pair_weights(self.x_self, self.x_in_ref, self.conf)


@dataclass(frozen=True)
class ViewGraph:
    nodes: tuple[str, ...]
    edges: tuple[ViewEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        known = set(self.nodes)
        for e in self.edges:
            if e.ref not in known or e.src not in known:
                raise ShapeMismatch(f"edge ({e.ref}, {e.src}) references unknown view")


@dataclass(frozen=True)
class GlobalAlignOptions:
    max_iter: int = 100
    tol: float = 1e-8


@dataclass
class GlobalAlignment:
    """Per-view similarity transforms into the common (gauge) frame."""

    transforms: dict[str, SimilarityTransform]
    objective_history: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    @property
    def final_objective(self) -> float:
        return self.objective_history[-1]


def _connected(nodes, edges) -> bool:
    parent = {n: n for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edges:
        ra, rb = find(e.ref), find(e.src)
        if ra != rb:
            parent[ra] = rb
    roots = {find(n) for n in nodes}
    return len(roots) <= 1


def _objective(g: ViewGraph, transforms) -> float:
    total = 0.0
    for e in g.edges:
        a = transforms[e.ref].apply(e.x_in_ref.points.reshape(-1, 3))
        b = transforms[e.src].apply(e.x_self.points.reshape(-1, 3))
        diff = a - b
        total += float(np.sum(e.weights() * np.sum(diff * diff, axis=1)))
    return total


def global_align(g: ViewGraph, opts: GlobalAlignOptions | None = None) -> GlobalAlignment:
    """Merge pairwise pointmap predictions into one coordinate system.

    Minimizes sum over edges and pixels of conf * ||T_ref(x_in_ref) -
    T_src(x_self)||^2 by sweeping per-view closed-form similarity solves,
    with the lexicographically smallest view pinned to the identity. A run
    that exhausts max_iter reports converged=False instead of raising.
    """
    opts = opts or GlobalAlignOptions()
    if not g.nodes:
        raise DisconnectedGraph("empty view graph")
    if not _connected(g.nodes, g.edges):
        raise DisconnectedGraph("view graph is not connected")

    order = sorted(g.nodes)
    gauge = order[0]
    transforms = {n: SimilarityTransform.identity() for n in order}

    # For each view, the correspondences it participates in: (local points,
    # partner view, partner points, weights). The local side is the one the
    # solved transform applies to.
    incident: dict[str, list] = {n: [] for n in order}
    for e in g.edges:
        pa = e.x_in_ref.points.reshape(-1, 3)
        pb = e.x_self.points.reshape(-1, 3)
        w = e.weights()
        incident[e.ref].append((pa, e.src, pb, w))
        incident[e.src].append((pb, e.ref, pa, w))

    history = [_objective(g, transforms)]
    converged = False
    sweeps = 0
    for sweeps in range(1, opts.max_iter + 1):
        for v in order:
            if v == gauge or not incident[v]:
                continue
            src = np.concatenate([loc for loc, _, _, _ in incident[v]])
            dst = np.concatenate(
                [transforms[other].apply(pts) for _, other, pts, _ in incident[v]]
            )
            w = np.concatenate([wt for _, _, _, wt in incident[v]])
            transforms[v] = umeyama(src, dst, weights=w, with_scale=True).transform
        history.append(_objective(g, transforms))
        prev, cur = history[-2], history[-1]
        if prev - cur <= opts.tol * max(prev, 1e-300):
            converged = True
            break

    return GlobalAlignment(
        transforms=transforms,
        objective_history=history,
        converged=converged,
        iterations=sweeps,
    )
