"""Build the classes/ directory of a bundle from a text encoder.

For every class name, each prompt template is filled and encoded; the per-
template vectors are pooled into one row per class (mean then L2
normalization, matching the usual zero-shot ensemble), written as a float32
matrix whose row i belongs to class id i+1, alongside names.txt with one
class name per line in the same order. With pooling disabled the raw
per-template rows are written instead, together with an index file saying
which (class, template) each row came from.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mltf
from .encoders import Encoder, run_encoder
from .errors import EmptyClassList, EncoderFailure
from .prompts import PromptSet

POOL_MODES = ("mean", "none")


def embed_classes(
    class_names: Sequence[str],
    encoder: Encoder,
    prompts: PromptSet | None = None,
    pool: str = "mean",
) -> np.ndarray:
    """Encode every (class, template) pair and pool per class.

    Returns an (L, D) float32 matrix with unit rows for pool="mean", or the
    raw (L * len(prompts), D) float32 matrix for pool="none", ordered class-
    major.
    """
    if pool not in POOL_MODES:
        raise ValueError(f"pool must be one of {POOL_MODES}, got {pool!r}")
    names = [str(n) for n in class_names]
    if not names:
        raise EmptyClassList("need at least one class name")
    prompts = prompts if prompts is not None else PromptSet()

    filled = [p for name in names for p in prompts.fill(name)]
    vectors = run_encoder(encoder, filled)
    per_class = vectors.reshape(len(names), len(prompts), -1)

    if pool == "none":
        return vectors.astype(np.float32)

    pooled = per_class.mean(axis=1)
    norms = np.linalg.norm(pooled, axis=1)
    dead = norms <= 0
    if np.any(dead):
        bad = [names[i] for i in np.flatnonzero(dead)]
        raise EncoderFailure(f"pooled embedding is zero for classes {bad}")
    return (pooled / norms[:, None]).astype(np.float32)


def export_class_embeddings(
    class_names: Sequence[str],
    encoder: Encoder,
    out_dir,
    prompts: PromptSet | None = None,
    pool: str = "mean",
) -> Path:
    """Write embeddings.mltf and names.txt (and row_index.json for pool="none").

    Returns the directory written. The layout matches what the evaluation
    side reads as a bundle's classes/ directory.
    """
    prompts = prompts if prompts is not None else PromptSet()
    matrix = embed_classes(class_names, encoder, prompts, pool)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mltf.save(out_dir / "embeddings.mltf", matrix)
    names = [str(n) for n in class_names]
    with open(out_dir / "names.txt", "w", encoding="utf-8") as f:
        for name in names:
            f.write(name + "\n")

    if pool == "none":
        index = [
            {"row": i * len(prompts) + j, "class": name, "template": t}
            for i, name in enumerate(names)
            for j, t in enumerate(prompts.templates)
        ]
        with open(out_dir / "row_index.json", "w", encoding="utf-8") as f:
            json.dump(index, f, indent=2)
            f.write("\n")
    return out_dir
