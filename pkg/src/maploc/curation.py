"""Benchmark construction: covisibility between frames, overlap-constrained
group selection with viewpoint-spread maximization, raw-to-NYU40 label
mapping, and camera-distribution statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InsufficientFrames, NoFeasibleGroup, NoValidPixels, ShapeMismatch
from .geometry import Intrinsics, RigidTransform, project, unproject

DEPTH_CONSISTENCY_TOL = 0.10
DEFAULT_MIN_OVERLAP = 0.3
NYU40_MAX_ID = 40


@dataclass(frozen=True)
class LabelMapping:
    """Raw scan label id -> NYU40 class id (0 = void), with class names."""

    table: dict[int, int]
    names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for raw, target in self.table.items():
            if not 0 <= target <= NYU40_MAX_ID:
                raise ValueError(f"mapped target {target} for raw id {raw} outside [0, 40]")

    @classmethod
    def from_tsv(cls, path) -> "LabelMapping":
        """Parse a tab-separated mapping file with columns
        (raw id, raw name, nyu40 id, nyu40 name); a non-numeric first row is
        treated as a header."""
        table: dict[int, int] = {}
        names: dict[int, str] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                cols = line.split("\t")
                if len(cols) < 4:
                    raise ValueError(f"expected 4 tab-separated columns, got {len(cols)}: {line!r}")
                try:
                    raw_id = int(cols[0])
                    target_id = int(cols[2])
                except ValueError:
                    continue  # header row
                table[raw_id] = target_id
                names[target_id] = cols[3]
        return cls(table=table, names=names)


def map_labels(raw, m: LabelMapping) -> np.ndarray:
    """Element-wise label lookup; raw ids without a table entry map to void."""
    grid = np.asarray(raw, dtype=np.int64)
    if grid.size == 0:
        return grid.astype(np.uint16)
    top = max(int(grid.max()), max(m.table.keys(), default=0))
    lut = np.zeros(top + 1, dtype=np.uint16)
    for raw_id, target in m.table.items():
        if raw_id <= top:
            lut[raw_id] = target
    return lut[grid]


@dataclass(frozen=True)
class SceneFrame:
    """The per-frame ground truth curation works from."""

    frame_id: str
    depth: np.ndarray
    pose: RigidTransform
    intrinsics: Intrinsics


@dataclass(frozen=True)
class GroupSpec:
    scene_id: str
    frame_ids: tuple[str, ...]
    overlap: np.ndarray  # pairwise covisibility, overlap[i, j] = covis(i -> j)


def covisibility(a: SceneFrame, b: SceneFrame, depth_tol: float = DEPTH_CONSISTENCY_TOL) -> float:
    """Fraction of a's valid pixels that reproject into b's image bounds with
    depth agreeing with b's ground truth within a relative tolerance."""
    if a.depth.ndim != 2 or b.depth.ndim != 2:
        raise ShapeMismatch("depth grids must be HxW")
    valid_a = a.depth > 0
    n_valid = int(valid_a.sum())
    if n_valid == 0:
        raise NoValidPixels(f"frame {a.frame_id} has no valid depth")
    pm = unproject(a.depth, a.intrinsics)
    world = a.pose.apply(pm.points.reshape(-1, 3)[valid_a.reshape(-1)])
    in_b = b.pose.inverse().apply(world)
    u, v, z = project(in_b, b.intrinsics)
    h, w = b.depth.shape
    cols = np.round(u).astype(np.int64)
    rows = np.round(v).astype(np.int64)
    inside = (z > 0) & (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    consistent = np.zeros(len(in_b), dtype=bool)
    if np.any(inside):
        depth_b = b.depth[rows[inside], cols[inside]]
        ok = (depth_b > 0) & (np.abs(z[inside] - depth_b) <= depth_tol * depth_b)
        consistent[inside] = ok
    return float(consistent.sum() / n_valid)


def camera_stats(pose_pairs) -> list[tuple[float, float]]:
    """Per pose pair: Euclidean distance between camera centers and the
    axis-angle magnitude of the relative rotation."""
    out = []
    for p1, p2 in pose_pairs:
        d_trans = float(np.linalg.norm(p1.translation - p2.translation))
        r_delta = Rotation.from_matrix(p1.rotation.T @ p2.rotation)
        d_rot = float(np.linalg.norm(r_delta.as_rotvec()))
        out.append((d_trans, d_rot))
    return out


def _overlap_ok(overlap: np.ndarray, i: int, j: int, min_overlap: float) -> bool:
    return min(overlap[i, j], overlap[j, i]) >= min_overlap


def build_groups(
    frames,
    sizes=(2, 3, 4),
    groups_per_size: int = 2,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
    seed: int = 0,
    scene_id: str = "",
) -> list[GroupSpec]:
    """Select viewpoint-diverse frame groups under an overlap constraint.

    Greedy per group: start from a feasible high-rotation-spread pair, then
    repeatedly add the frame maximizing the minimum pairwise rotation
    distance to the chosen set, requiring each added frame to overlap at
    least one chosen frame by min_overlap. Selection is deterministic for a
    given seed and invariant to the input frame order; distinct groups are
    preferred but duplicates are emitted when a scene cannot supply more.
    """
    frames = sorted(frames, key=lambda fr: fr.frame_id)
    n = len(frames)
    sizes = tuple(int(s) for s in sizes)
    if any(n < s for s in sizes):
        raise InsufficientFrames(f"scene has {n} frames, need {max(sizes)}")

    overlap = np.eye(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                overlap[i, j] = covisibility(frames[i], frames[j])
    rot_dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            (_, d_rot), = camera_stats([(frames[i].pose, frames[j].pose)])
            rot_dist[i, j] = rot_dist[j, i] = d_rot

    feasible_pairs = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if _overlap_ok(overlap, i, j, min_overlap)
    ]
    if not feasible_pairs:
        raise NoFeasibleGroup(f"no frame pair reaches overlap {min_overlap}")
    # Highest rotation spread first; ids break exact ties deterministically.
    starts = sorted(feasible_pairs, key=lambda p: (-rot_dist[p[0], p[1]], p[0], p[1]))

    groups: list[GroupSpec] = []
    for size in sizes:
        chosen_sets: list[frozenset[int]] = []
        for g in range(groups_per_size):
            rng = np.random.default_rng([seed, size, g])
            picked = _pick_group(
                starts, chosen_sets, size, n, overlap, rot_dist, min_overlap, rng
            )
            if picked is None:
                raise NoFeasibleGroup(
                    f"no feasible group of size {size} at overlap {min_overlap}"
                )
            chosen_sets.append(frozenset(picked))
            groups.append(
                GroupSpec(
                    scene_id=scene_id,
                    frame_ids=tuple(frames[i].frame_id for i in picked),
                    overlap=overlap[np.ix_(picked, picked)].copy(),
                )
            )
    return groups


def _pick_group(starts, chosen_sets, size, n, overlap, rot_dist, min_overlap, rng):
    """Greedy growth from each candidate start; returns the first start that
    yields a fresh feasible group, falling back to any feasible one."""
    fallback = None
    for si in range(len(starts)):
        start = starts[(len(chosen_sets) + si) % len(starts)]
        picked = list(start)
        while len(picked) < size:
            candidates = [
                k
                for k in range(n)
                if k not in picked
                and any(_overlap_ok(overlap, k, c, min_overlap) for c in picked)
            ]
            if not candidates:
                break
            spread = np.array([min(rot_dist[k, c] for c in picked) for k in candidates])
            best = spread.max()
            top = [k for k, s in zip(candidates, spread) if s >= best - 1e-12]
            picked.append(int(top[rng.integers(len(top))]) if len(top) > 1 else top[0])
        if len(picked) < size:
            continue
        picked = sorted(picked)
        if frozenset(picked) not in chosen_sets:
            return picked
        if fallback is None:
            fallback = picked
    return fallback
