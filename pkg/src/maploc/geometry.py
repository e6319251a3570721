"""Camera and pointmap mathematics: unprojection, pose algebra, rotation
distances, and the grid-to-cloud flattening every metric consumes.

Conventions used throughout the package:
  - poses are camera-to-world rigid transforms,
  - pixel coordinates are (u, v) = (column, row),
  - label 0 is the void class and never scores,
  - relative_pose(a, b) expresses frame b in frame a.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateTranslation, NonOrthonormalRotation, ShapeMismatch

ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")

    @classmethod
    def from_matrix(cls, K) -> "Intrinsics":
        K = np.asarray(K, dtype=np.float64)
        if K.shape != (3, 3):
            raise ShapeMismatch(f"intrinsics matrix must be 3x3, got {K.shape}")
        return cls(fx=float(K[0, 0]), fy=float(K[1, 1]), cx=float(K[0, 2]), cy=float(K[1, 2]))

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


def _check_rotation(R) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ShapeMismatch(f"rotation must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NonOrthonormalRotation("rotation contains non-finite entries")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > ROTATION_TOL * 10 or abs(np.linalg.det(R) - 1.0) > ROTATION_TOL * 10:
        raise NonOrthonormalRotation(f"matrix is not a proper rotation (|R'R-I|={err:.2e})")
    return R


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation. Used for camera poses (camera-to-world)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> "RigidTransform":
        M = np.asarray(M, dtype=np.float64)
        if M.shape != (4, 4):
            raise ShapeMismatch(f"pose matrix must be 4x4, got {M.shape}")
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)


@dataclass(frozen=True)
class SimilarityTransform:
    """Scale + rotation + translation: x -> s*R*x + t."""

    scale: float
    rigid: RigidTransform

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, RigidTransform.identity())

    @property
    def rotation(self) -> np.ndarray:
        return self.rigid.rotation

    @property
    def translation(self) -> np.ndarray:
        return self.rigid.translation

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (self.scale * pts) @ self.rotation.T + self.translation

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """self o other: apply `other` first, then `self`."""
        rot = self.rotation @ other.rotation
        t = self.scale * (self.rotation @ other.translation) + self.translation
        return SimilarityTransform(self.scale * other.scale, RigidTransform(rot, t))

    def inverse(self) -> "SimilarityTransform":
        Rt = self.rotation.T
        s = 1.0 / self.scale
        return SimilarityTransform(s, RigidTransform(Rt, -s * (Rt @ self.translation)))


@dataclass(frozen=True)
class Pointmap:
    """H x W grid of 3D points in a named camera frame, with optional
    per-pixel confidence (0 marks an invalid pixel)."""

    points: np.ndarray
    frame: str = "camera"
    confidence: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 3:
            raise ShapeMismatch(f"pointmap must be HxWx3, got {pts.shape}")
        object.__setattr__(self, "points", pts)
        if self.confidence is not None:
            conf = np.asarray(self.confidence, dtype=np.float64)
            if conf.shape != pts.shape[:2]:
                raise ShapeMismatch(
                    f"confidence {conf.shape} does not match grid {pts.shape[:2]}"
                )
            object.__setattr__(self, "confidence", conf)

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def width(self) -> int:
        return self.points.shape[1]

    def valid_mask(self) -> np.ndarray:
        if self.confidence is None:
            return np.ones(self.points.shape[:2], dtype=bool)
        return self.confidence > 0


@dataclass(frozen=True)
class LabeledCloud:
    """Flat point set with one semantic label per point (0 = void)."""

    points: np.ndarray
    labels: np.ndarray
    instances: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(labels) != len(pts):
            raise ShapeMismatch(f"{len(pts)} points but {len(labels)} labels")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)
        if self.instances is not None:
            inst = np.asarray(self.instances, dtype=np.int64).reshape(-1)
            if len(inst) != len(pts):
                raise ShapeMismatch(f"{len(pts)} points but {len(inst)} instance ids")
            object.__setattr__(self, "instances", inst)

    def __len__(self) -> int:
        return len(self.points)


def unproject(depth, K: Intrinsics, frame: str = "camera") -> Pointmap:
    """Lift a depth grid into a camera-frame pointmap.

    Zero depth marks an invalid pixel; those get confidence 0.
    """
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ShapeMismatch(f"depth must be HxW, got {d.shape}")
    h, w = d.shape
    us = np.arange(w, dtype=np.float64)[None, :]
    vs = np.arange(h, dtype=np.float64)[:, None]
    pts = np.empty((h, w, 3), dtype=np.float64)
    pts[..., 0] = (us - K.cx) / K.fx * d
    pts[..., 1] = (vs - K.cy) / K.fy * d
    pts[..., 2] = d
    conf = (d > 0).astype(np.float64)
    return Pointmap(points=pts, frame=frame, confidence=conf)


def project(points, K: Intrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project camera-frame points through a pinhole: returns (u, v, z)."""
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * pts[..., 0] / z + K.cx
        v = K.fy * pts[..., 1] / z + K.cy
    return u, v, z


def apply_transform(T, obj):
    """Apply a similarity or rigid transform to a Pointmap, LabeledCloud, or
    raw point array; labels and confidence pass through untouched."""
    if isinstance(obj, Pointmap):
        return replace(obj, points=T.apply(obj.points))
    if isinstance(obj, LabeledCloud):
        return LabeledCloud(T.apply(obj.points), obj.labels, obj.instances)
    return T.apply(obj)


def rotation_geodesic(Ra, Rb) -> float:
    """Geodesic angle between two rotations, i.e. the rotation angle of
    Ra'Rb. Computed from both the trace (cosine) and the skew part (sine)
    so tiny angles are not lost to arccos conditioning."""
    Ra = _check_rotation(Ra)
    Rb = _check_rotation(Rb)
    rel = Ra.T @ Rb
    cos = (np.trace(rel) - 1.0) / 2.0
    sin_vec = 0.5 * np.array(
        [rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]
    )
    return float(np.arctan2(np.linalg.norm(sin_vec), cos))


def translation_angle(ta, tb) -> float:
    """Angle between two translation directions in [0, pi]."""
    ta = np.asarray(ta, dtype=np.float64).reshape(3)
    tb = np.asarray(tb, dtype=np.float64).reshape(3)
    na = float(np.linalg.norm(ta))
    nb = float(np.linalg.norm(tb))
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateTranslation(f"translation norms {na:.3e}, {nb:.3e} too small")
    return float(np.arccos(np.clip(ta @ tb / (na * nb), -1.0, 1.0)))


def relative_pose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Pose of frame b expressed in frame a: (Ra^-1 Rb, Ra^-1 (tb - ta))."""
    return a.inverse().compose(b)


def flatten(pm: Pointmap, labels, conf_min: float = 0.0, instances=None) -> LabeledCloud:
    """Turn a labeled pointmap into a cloud, keeping pixels whose confidence
    is >= conf_min and whose label is not void. Raster order is preserved.

    A pointmap without a confidence channel is treated as confidence 1
    everywhere.
    """
    lab = np.asarray(labels)
    if lab.shape != pm.points.shape[:2]:
        raise ShapeMismatch(f"labels {lab.shape} do not match grid {pm.points.shape[:2]}")
    if pm.confidence is None:
        keep = np.ones(lab.shape, dtype=bool)
    else:
        keep = pm.confidence >= conf_min
    keep &= lab != 0
    flat = keep.reshape(-1)
    pts = pm.points.reshape(-1, 3)[flat]
    labs = lab.reshape(-1)[flat]
    inst = None
    if instances is not None:
        inst_grid = np.asarray(instances)
        if inst_grid.shape != lab.shape:
            raise ShapeMismatch(
                f"instances {inst_grid.shape} do not match grid {lab.shape}"
            )
        inst = inst_grid.reshape(-1)[flat]
    return LabeledCloud(pts, labs, inst)
