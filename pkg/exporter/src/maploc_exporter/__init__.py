"""Bridge from model outputs into MLTF evaluation bundles."""

from .embeddings import embed_classes, export_class_embeddings
from .encoders import hashed_encoder, resolve_encoder
from .errors import ExporterError
from .predictions import export_predictions, frame_dir_for
from .prompts import DEFAULT_TEMPLATES, PromptSet

__all__ = [
    "DEFAULT_TEMPLATES",
    "ExporterError",
    "PromptSet",
    "embed_classes",
    "export_class_embeddings",
    "export_predictions",
    "frame_dir_for",
    "hashed_encoder",
    "resolve_encoder",
]

__version__ = "0.1.0"
