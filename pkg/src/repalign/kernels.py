"""Similarity kernels built from scalar scores, description lengths, or
blends of existing kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import ActionSet, SimilarityMatrix, ValueScores, normalize_kernel


@dataclass(frozen=True)
class CorruptionSpec:
    k: int
    replacement_low: Optional[float] = None
    replacement_high: Optional[float] = None


def score_kernel(scores: ValueScores) -> SimilarityMatrix:
    """Similarity ``1 - |s_i - s_j| / span`` with span the width of the scale."""
    s = scores.scores
    e = 1.0 - np.abs(s[:, None] - s[None, :]) / scores.span
    np.fill_diagonal(e, 1.0)
    return SimilarityMatrix(e, "synthetic")


def corrupt_scores(scores: ValueScores, spec: CorruptionSpec, rng) -> ValueScores:
    """Resample the scores of ``spec.k`` distinct, uniformly chosen actions.

    Replacement bounds default to the full value scale.
    """
    n = scores.n
    if not 0 <= spec.k <= n:
        raise ValueError(f"cannot corrupt {spec.k} of {n} actions")
    lo = scores.scale_min if spec.replacement_low is None else spec.replacement_low
    hi = scores.scale_max if spec.replacement_high is None else spec.replacement_high
    if not scores.scale_min <= lo <= hi <= scores.scale_max:
        raise ValueError("replacement bounds must lie within the value scale")
    out = np.array(scores.scores)
    if spec.k:
        idx = rng.choice(n, size=spec.k, replace=False)
        out[idx] = rng.uniform(lo, hi, size=spec.k)
    return scores.with_scores(out)


def interpolate_kernel(base: SimilarityMatrix, target: SimilarityMatrix,
                       alpha: float) -> SimilarityMatrix:
    if base.n != target.n:
        raise ValueError(f"dimension mismatch: {base.n} vs {target.n}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return SimilarityMatrix(base.entries, "derived")
    if alpha == 1.0:
        return SimilarityMatrix(target.entries, "derived")
    e = (1.0 - alpha) * base.entries + alpha * target.entries
    return SimilarityMatrix(e, "derived")


def description_lengths(actions: ActionSet) -> np.ndarray:
    return np.array([len(d) for d in actions.descriptions], dtype=float)


def raw_length_similarity(actions: ActionSet) -> np.ndarray:
    """``M - |len_i - len_j|`` with ``M`` the longest description length."""
    lengths = description_lengths(actions)
    return lengths.max() - np.abs(lengths[:, None] - lengths[None, :])


def length_kernel(actions: ActionSet) -> SimilarityMatrix:
    raw = raw_length_similarity(actions)
    if raw.min() == raw.max():
        # all descriptions the same length: every pair is maximally similar
        return SimilarityMatrix(np.ones_like(raw), "derived")
    return normalize_kernel(SimilarityMatrix(raw, "derived"))


def length_scores(actions: ActionSet) -> ValueScores:
    lengths = description_lengths(actions)
    lo, hi = lengths.min(), lengths.max()
    if lo == hi:
        raise ValueError("all descriptions have equal length; cannot rescale")
    scaled = (lengths - lo) / (hi - lo) * 100.0
    return ValueScores("length", scaled, 0.0, 100.0, 50.0)
