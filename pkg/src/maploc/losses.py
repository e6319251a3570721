"""The distillation objective as pure functions: per-pixel feature
regression and the weighted total-loss combiner. Confidence and matching
losses arrive as precomputed scalars; no training happens here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ShapeMismatch

# Weights used by the published training runs: beta for the matching loss,
# gamma 20 for a single distilled feature, (20, 4) for the two-feature variant.
DEFAULT_BETA = 0.75
DEFAULT_GAMMA = 20.0
DEFAULT_GAMMAS_TWO_TERM = (20.0, 4.0)


@dataclass(frozen=True)
class LossWeights:
    beta: float = DEFAULT_BETA
    gammas: tuple[float, ...] = (DEFAULT_GAMMA,)

    def __post_init__(self):
        if self.beta < 0 or any(g < 0 for g in self.gammas):
            raise ValueError("loss weights must be nonnegative")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))


def l2d(pred_feat, target_feat, norm_mode: str = "l2_mean") -> float:
    """Feature regression loss: the per-pixel difference norm (L2 by
    default, L1 with l1_mean) averaged over all pixels."""
    if norm_mode not in ("l2_mean", "l1_mean"):
        raise ValueError(f"unknown norm mode {norm_mode!r}")
    pred = np.asarray(pred_feat, dtype=np.float64)
    target = np.asarray(target_feat, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"feature grids {pred.shape} vs {target.shape}")
    diff = pred - target
    if norm_mode == "l2_mean":
        per_pixel = np.sqrt(np.sum(diff * diff, axis=-1))
    else:
        per_pixel = np.sum(np.abs(diff), axis=-1)
    return float(np.mean(per_pixel))


def total_loss(l_conf: float, l_match: float, l_2d_terms,
               w: LossWeights | None = None) -> float:
    """l_conf + beta * l_match + sum_i gamma_i * term_i.

    Defaults to the published weights (beta 0.75, gamma 20)."""
    w = w if w is not None else LossWeights()
    terms = [float(t) for t in np.atleast_1d(np.asarray(l_2d_terms, dtype=np.float64))]
    if len(terms) != len(w.gammas):
        raise LengthMismatch(f"{len(terms)} loss terms but {len(w.gammas)} gammas")
    return float(l_conf) + w.beta * float(l_match) + sum(g * t for g, t in zip(w.gammas, terms))
