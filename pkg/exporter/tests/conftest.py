"""Shared fixtures for the exporter test suite."""

import json

import numpy as np
import pytest

from maploc_exporter import mltf

# Filled by the acceptance tests; printed after the run so the verdict lines
# survive output capture.
ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("exporter acceptance gate")
        for name, verdict in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"[ACCEPTANCE] {name}: {verdict}")


@pytest.fixture
def acceptance_registry():
    return ACCEPTANCE_RESULTS


@pytest.fixture
def gt_writer():
    # Handed out as a fixture: two conftest.py files exist in this repo, so
    # exporter tests must not import one by module name.
    return write_frame_gt


def write_frame_gt(frame_dir, h=6, w=8):
    """Populate a frame directory with minimal ground-truth tensors."""
    frame_dir.mkdir(parents=True, exist_ok=True)
    depth = 1.0 + np.arange(h * w, dtype=np.float32).reshape(h, w) / (h * w)
    mltf.save(frame_dir / "gt_depth.mltf", depth)
    mltf.save(frame_dir / "gt_pose.mltf", np.eye(4, dtype=np.float64))
    k = np.array([[50.0, 0, w / 2], [0, 50.0, h / 2], [0, 0, 1]], dtype=np.float64)
    mltf.save(frame_dir / "intrinsics.mltf", k)
    labels = np.ones((h, w), dtype=np.uint16)
    mltf.save(frame_dir / "gt_labels.mltf", labels)
    return depth


@pytest.fixture
def mini_bundle(tmp_path):
    """One scene / one group / two frames, the second via a path override."""
    root = tmp_path / "bundle"
    manifest = {
        "schema_version": 1,
        "scenes": [
            {
                "id": "s0",
                "groups": [
                    {
                        "id": "g0",
                        "frames": [
                            {"id": "f0"},
                            {"id": "f1", "path": "elsewhere/f1"},
                        ],
                    }
                ],
            }
        ],
    }
    root.mkdir(parents=True)
    with open(root / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    write_frame_gt(root / "s0" / "g0" / "f0")
    write_frame_gt(root / "elsewhere" / "f1")
    return root
