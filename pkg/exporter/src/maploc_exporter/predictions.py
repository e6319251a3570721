"""Write model outputs into an existing bundle as prediction tensors.

A frame directory already holds the ground-truth files; the exporter adds
pred_pointmap, pred_conf, pred_feat and/or pred_depth next to them after
checking each array against the frame's ground-truth geometry. Everything is
stored float32, which is the dtype the evaluation side expects for
predictions.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from . import mltf
from .errors import ManifestError, MissingGroundTruth, ShapeMismatch, UnknownOutput

GT_FILES = ("gt_depth.mltf", "gt_pose.mltf", "intrinsics.mltf", "gt_labels.mltf")

# output name -> expected rank ("D" marks a free channel dimension)
EXPORTABLE = {
    "pred_pointmap": ("H", "W", 3),
    "pred_conf": ("H", "W"),
    "pred_feat": ("H", "W", "D"),
    "pred_depth": ("H", "W"),
}


def frame_dir_for(bundle_root, scene_id: str, group_id: str, frame_id: str) -> Path:
    """Resolve a frame's directory through the bundle manifest.

    Honors per-frame "path" overrides. Raises ManifestError when the manifest
    is absent or the frame is not listed.
    """
    root = Path(bundle_root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise ManifestError(f"no manifest.json under {root}")
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    for scene in manifest.get("scenes", []):
        if str(scene.get("id")) != scene_id:
            continue
        for group in scene.get("groups", []):
            if str(group.get("id")) != group_id:
                continue
            for frame in group.get("frames", []):
                if str(frame.get("id")) == frame_id:
                    rel = frame.get("path", f"{scene_id}/{group_id}/{frame_id}")
                    return root / rel
    raise ManifestError(
        f"frame {scene_id}/{group_id}/{frame_id} is not listed in the manifest"
    )


def _check_shape(name: str, arr: np.ndarray, hw: tuple[int, int], frame: str) -> None:
    spec = EXPORTABLE[name]
    ok = arr.ndim == len(spec)
    if ok:
        for got, want in zip(arr.shape, spec):
            if want == "H":
                ok = ok and got == hw[0]
            elif want == "W":
                ok = ok and got == hw[1]
            elif want == "D":
                ok = ok and got >= 1
            else:
                ok = ok and got == want
    if not ok:
        want_str = "x".join(
            str(hw[0]) if w == "H" else str(hw[1]) if w == "W" else str(w)
            for w in spec
        )
        raise ShapeMismatch(
            f"frame {frame}: {name} has shape {tuple(arr.shape)}, expected {want_str}"
        )


def export_predictions(frame_dir, outputs: Mapping[str, np.ndarray]) -> list[Path]:
    """Validate model outputs against a frame's ground truth and write them.

    `outputs` maps tensor names (see EXPORTABLE) to arrays. Returns the paths
    written, in sorted name order so repeated exports are reproducible.
    """
    frame_dir = Path(frame_dir)
    frame = frame_dir.name
    missing = [n for n in GT_FILES if not (frame_dir / n).is_file()]
    if missing:
        raise MissingGroundTruth(
            f"frame {frame}: missing ground truth {', '.join(sorted(missing))}"
        )
    unknown = sorted(set(outputs) - set(EXPORTABLE))
    if unknown:
        raise UnknownOutput(
            f"frame {frame}: {', '.join(unknown)} (exportable: "
            f"{', '.join(sorted(EXPORTABLE))})"
        )

    hw = mltf.load(frame_dir / "gt_depth.mltf").shape
    written = []
    for name in sorted(outputs):
        arr = np.asarray(outputs[name], dtype=np.float32)
        _check_shape(name, arr, hw, frame)
        path = frame_dir / f"{name}.mltf"
        mltf.save(path, arr)
        written.append(path)
    return written
