"""Binary tensor format (MLTF) and the scene/group/frame bundle layout.

An MLTF file is: 4-byte magic "MLTF", format version (u32 LE, currently 1),
dtype code (u8), rank (u8), one u64 LE per dimension, then the raw
little-endian row-major payload. Tensors are exposed as numpy arrays.

A bundle is a directory tree described by a manifest.json at its root:

    {
      "schema_version": 1,
      "scenes": [
        {"id": "scene0",
         "groups": [
            {"id": "g0",
             "reference": "f0",              # optional, defaults to first
             "frames": [{"id": "f0"}, {"id": "f1", "path": "alt/dir"}]}
         ]}
      ]
    }

Frame files live in <root>/<scene>/<group>/<frame>/ unless the frame entry
gives an explicit "path" relative to the root. Poses are stored as 4x4 f64
camera-to-world matrices.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    GroupSizeOutOfRange,
    InvalidShape,
    MissingFile,
    MissingManifest,
    TruncatedPayload,
    UnknownDtype,
    UnsupportedVersion,
)

MAGIC = b"MLTF"
VERSION = 1

# dtype code -> little-endian numpy dtype
DTYPE_OF_CODE = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("u1"),
    3: np.dtype("<i4"),
    4: np.dtype("<u2"),
}
CODE_OF_DTYPE = {dt: code for code, dt in DTYPE_OF_CODE.items()}

MANDATORY_FRAME_FILES = (
    "gt_depth.mltf",
    "gt_pose.mltf",
    "intrinsics.mltf",
    "gt_labels.mltf",
)
OPTIONAL_FRAME_FILES = (
    "gt_instances.mltf",
    "pred_pointmap.mltf",
    "pred_pointmap_self.mltf",
    "pred_conf.mltf",
    "pred_feat.mltf",
    "pred_depth.mltf",
    "pred_labels.mltf",
)


def dtype_code(dtype) -> int:
    """Return the MLTF code for a numpy dtype, raising UnknownDtype otherwise."""
    dt = np.dtype(dtype).newbyteorder("<")
    if dt not in CODE_OF_DTYPE:
        raise UnknownDtype(f"dtype {np.dtype(dtype)} has no MLTF code")
    return CODE_OF_DTYPE[dt]


def write_tensor(path, tensor) -> None:
    """Write a numpy array to an MLTF file."""
    arr = np.asarray(tensor)
    code = dtype_code(arr.dtype)
    if arr.ndim == 0 or any(d < 1 for d in arr.shape):
        raise InvalidShape(f"shape {arr.shape} must be nonempty with all dims >= 1")
    arr = np.ascontiguousarray(arr.astype(DTYPE_OF_CODE[code], copy=False))
    header = struct.pack("<4sIBB", MAGIC, VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(arr.tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) < n:
        raise TruncatedPayload(f"file ends inside {what} ({len(buf)}/{n} bytes)")
    return buf


def read_tensor(path) -> np.ndarray:
    """Read an MLTF file back into a numpy array. Inverse of write_tensor."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise UnsupportedVersion(f"version {version}, expected {VERSION}")
        code, rank = struct.unpack("<BB", _read_exact(f, 2, "dtype/rank"))
        if code not in DTYPE_OF_CODE:
            raise UnknownDtype(f"unknown dtype code {code}")
        if rank == 0:
            raise InvalidShape("rank 0 is not a valid MLTF shape")
        shape = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank, "dims"))
        if any(d < 1 for d in shape):
            raise InvalidShape(f"shape {shape} contains a zero dimension")
        dt = DTYPE_OF_CODE[code]
        count = 1
        for d in shape:
            count *= d
        payload = _read_exact(f, count * dt.itemsize, "payload")
    return np.frombuffer(payload, dtype=dt).reshape(shape).copy()


@dataclass(frozen=True)
class FrameEntry:
    """One frame: its id and the directory holding its tensors."""

    frame_id: str
    directory: Path

    def path(self, name: str) -> Path:
        return self.directory / name

    def has(self, name: str) -> bool:
        return self.path(name).is_file()

    def load(self, name: str) -> np.ndarray:
        return read_tensor(self.path(name))


@dataclass(frozen=True)
class GroupEntry:
    group_id: str
    frames: tuple[FrameEntry, ...]
    reference_id: str

    @property
    def reference(self) -> FrameEntry:
        for fr in self.frames:
            if fr.frame_id == self.reference_id:
                return fr
        raise MissingManifest(
            f"group {self.group_id}: reference frame {self.reference_id!r} not listed"
        )


@dataclass(frozen=True)
class SceneEntry:
    scene_id: str
    groups: tuple[GroupEntry, ...]


@dataclass(frozen=True)
class Bundle:
    root: Path
    scenes: tuple[SceneEntry, ...]
    class_names: tuple[str, ...] = field(default=())

    def has_class_embeddings(self) -> bool:
        return (self.root / "classes" / "embeddings.mltf").is_file()

    def load_class_embeddings(self) -> np.ndarray:
        return read_tensor(self.root / "classes" / "embeddings.mltf")

    def iter_groups(self):
        for scene in self.scenes:
            for group in scene.groups:
                yield scene, group


def load_bundle(root) -> Bundle:
    """Load and validate a bundle directory.

    Raises MissingManifest when there is no manifest, GroupSizeOutOfRange for
    groups outside 2..4 frames, and MissingFile listing every absent mandatory
    ground-truth file across the whole bundle.
    """
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(f"no manifest.json under {root}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)

    scenes = []
    missing: list[str] = []
    for scene_doc in manifest.get("scenes", []):
        scene_id = str(scene_doc["id"])
        groups = []
        for group_doc in scene_doc.get("groups", []):
            group_id = str(group_doc["id"])
            frame_docs = group_doc.get("frames", [])
            if not 2 <= len(frame_docs) <= 4:
                raise GroupSizeOutOfRange(
                    f"{scene_id}/{group_id}: {len(frame_docs)} frames, expected 2-4"
                )
            frames = []
            for frame_doc in frame_docs:
                frame_id = str(frame_doc["id"])
                rel = frame_doc.get("path", f"{scene_id}/{group_id}/{frame_id}")
                entry = FrameEntry(frame_id, root / rel)
                for name in MANDATORY_FRAME_FILES:
                    if not entry.has(name):
                        missing.append(str(Path(rel) / name))
                frames.append(entry)
            reference_id = str(group_doc.get("reference", frames[0].frame_id))
            groups.append(GroupEntry(group_id, tuple(frames), reference_id))
        scenes.append(SceneEntry(scene_id, tuple(groups)))

    if missing:
        raise MissingFile(sorted(set(missing)))

    names_path = root / "classes" / "names.txt"
    class_names: tuple[str, ...] = ()
    if names_path.is_file():
        with open(names_path, encoding="utf-8") as f:
            class_names = tuple(line.rstrip("\n") for line in f if line.strip())

    return Bundle(root=root, scenes=tuple(scenes), class_names=class_names)


def write_manifest(root, manifest: dict) -> None:
    """Write a manifest.json with stable key order."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
