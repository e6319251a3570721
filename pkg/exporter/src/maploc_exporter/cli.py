"""Command-line entry points: export-embeddings and export-preds."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .embeddings import POOL_MODES, export_class_embeddings
from .encoders import hashed_encoder, resolve_encoder
from .errors import ExporterError
from .predictions import EXPORTABLE, export_predictions, frame_dir_for
from .prompts import PromptSet, load_templates


def _read_class_names(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def embeddings_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Embed class names through prompt templates into a "
        "bundle classes/ directory.",
    )
    parser.add_argument(
        "--classes", required=True, help="text file, one class name per line"
    )
    parser.add_argument(
        "--out", required=True, help="directory to write embeddings.mltf + names.txt"
    )
    parser.add_argument("--pool", choices=POOL_MODES, default="mean")
    parser.add_argument(
        "--encoder",
        default=None,
        help="module:function giving the text encoder (default: built-in "
        "deterministic hash encoder)",
    )
    parser.add_argument(
        "--dim", type=int, default=64, help="dimension of the built-in encoder"
    )
    parser.add_argument(
        "--templates", default=None, help="file with one prompt template per line"
    )
    args = parser.parse_args(argv)
    try:
        names = _read_class_names(args.classes)
        prompts = load_templates(args.templates) if args.templates else PromptSet()
        encoder = (
            resolve_encoder(args.encoder) if args.encoder else hashed_encoder(args.dim)
        )
        out = export_class_embeddings(names, encoder, args.out, prompts, args.pool)
    except (ExporterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(names)} classes x {len(prompts)} templates to {out}")
    return 0


def _parse_outputs(pairs) -> dict[str, np.ndarray]:
    outputs = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep:
            raise ValueError(f"output {pair!r} is not name=file.npy")
        outputs[name] = np.load(path)
    return outputs


def preds_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-preds",
        description="Validate model output arrays against a frame's ground "
        "truth and write them into the bundle.",
    )
    parser.add_argument("--bundle", required=True, help="bundle root directory")
    parser.add_argument("--scene", required=True)
    parser.add_argument("--group", required=True)
    parser.add_argument("--frame", required=True)
    parser.add_argument(
        "outputs",
        nargs="+",
        metavar="NAME=FILE",
        help=f"tensors to export as name=file.npy; names: "
        f"{', '.join(sorted(EXPORTABLE))}",
    )
    args = parser.parse_args(argv)
    try:
        frame_dir = frame_dir_for(args.bundle, args.scene, args.group, args.frame)
        written = export_predictions(frame_dir, _parse_outputs(args.outputs))
    except (ExporterError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0
