"""Text encoders the exporter can drive.

The exporter does not ship a language model. An encoder is any callable
mapping a list of prompt strings to an (N, D) float array; real deployments
pass their model's text tower in, and a deterministic hash-based stand-in is
provided for pipelines and tests.
"""

from __future__ import annotations

import hashlib
from importlib import import_module
from typing import Callable, Sequence

import numpy as np

from .errors import EncoderFailure

Encoder = Callable[[Sequence[str]], np.ndarray]


def hashed_encoder(dim: int = 64) -> Encoder:
    """Deterministic stand-in encoder.

    Each prompt is hashed to seed a generator whose output is a unit vector,
    so equal prompts map to equal vectors on every platform.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")

    def encode(prompts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(prompts), dim), dtype=np.float64)
        for i, text in enumerate(prompts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            vec = np.random.default_rng(seed).standard_normal(dim)
            out[i] = vec / np.linalg.norm(vec)
        return out

    return encode


def resolve_encoder(spec: str) -> Encoder:
    """Look up an encoder given as "module:function" or "module:factory()".

    A trailing "()" calls the attribute with no arguments to obtain the
    encoder; otherwise the attribute itself is used.
    """
    mod_name, _, attr = spec.partition(":")
    if not mod_name or not attr:
        raise EncoderFailure(f"encoder spec {spec!r} is not module:function")
    call = attr.endswith("()")
    if call:
        attr = attr[:-2]
    try:
        target = getattr(import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise EncoderFailure(f"cannot import encoder {spec!r}: {exc}") from exc
    return target() if call else target


def run_encoder(encoder: Encoder, prompts: Sequence[str]) -> np.ndarray:
    """Invoke the encoder and normalize its output to a 2-D float64 array."""
    try:
        raw = encoder(list(prompts))
    except Exception as exc:
        raise EncoderFailure(f"encoder raised: {exc}") from exc
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != len(prompts):
        raise EncoderFailure(
            f"encoder returned shape {arr.shape}, expected ({len(prompts)}, D)"
        )
    if not np.all(np.isfinite(arr)):
        raise EncoderFailure("encoder returned non-finite values")
    return arr
