"""Core data types shared by every other module.

Similarity matrices, value scores and action catalogs are immutable once
built; the numpy buffers inside them are flagged read-only so that a kernel
handed to several concurrent runs cannot be modified by any of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PSD_FLOOR = 1e-8
CHOLESKY_JITTER = 1e-6


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ActionSet:
    """Ordered catalog of textual action descriptions.

    Descriptions are opaque payload; only their lengths are ever used.
    """

    descriptions: tuple

    def __post_init__(self):
        descriptions = tuple(self.descriptions)
        if not descriptions:
            raise ValueError("an action set needs at least one action")
        for i, d in enumerate(descriptions):
            if not isinstance(d, str) or not d.strip():
                raise ValueError(f"action {i} has an empty description")
        object.__setattr__(self, "descriptions", descriptions)

    @property
    def n(self) -> int:
        return len(self.descriptions)

    @property
    def ids(self) -> range:
        return range(self.n)

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.descriptions[i]


@dataclass(frozen=True)
class ValueScores:
    """Per-action scores for one value dimension on a bounded scale."""

    value_name: str
    scores: np.ndarray
    scale_min: float
    scale_max: float
    bad_threshold: float

    def __post_init__(self):
        scores = _frozen(self.scores)
        if scores.ndim != 1 or scores.size == 0:
            raise ValueError("scores must be a nonempty vector")
        if not self.scale_min < self.scale_max:
            raise ValueError(
                f"degenerate scale [{self.scale_min}, {self.scale_max}]")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        lo, hi = float(scores.min()), float(scores.max())
        if lo < self.scale_min or hi > self.scale_max:
            raise ValueError(
                f"scores span [{lo}, {hi}], outside scale "
                f"[{self.scale_min}, {self.scale_max}]")
        if not self.scale_min <= self.bad_threshold <= self.scale_max:
            raise ValueError("bad_threshold must lie within the scale")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "scale_min", float(self.scale_min))
        object.__setattr__(self, "scale_max", float(self.scale_max))
        object.__setattr__(self, "bad_threshold", float(self.bad_threshold))

    @property
    def n(self) -> int:
        return self.scores.size

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.scale_min + self.scale_max)

    @property
    def span(self) -> float:
        return self.scale_max - self.scale_min

    def with_scores(self, scores) -> "ValueScores":
        return ValueScores(self.value_name, scores, self.scale_min,
                           self.scale_max, self.bad_threshold)


SYNTHETIC_SCALE = (-3.0, 3.0)
HUMAN_SCALE = (0.0, 100.0)


def synthetic_scores(n: int, rng, value_name: str = "synthetic") -> ValueScores:
    """Ground-truth scores drawn uniformly on [-3, 3], bad threshold 0."""
    lo, hi = SYNTHETIC_SCALE
    return ValueScores(value_name, rng.uniform(lo, hi, size=n), lo, hi, 0.0)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Square pairwise-similarity kernel over an action catalog.

    Construction does not enforce the kernel invariants, since file-read
    matrices must be representable before they can be checked; call
    :func:`validate_kernel` for that.
    """

    entries: np.ndarray
    provenance: str = "derived"

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"kernel must be square, got {entries.shape}")
        if self.provenance not in ("synthetic", "file", "derived"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class SplitSpec:
    personalization_ids: tuple
    generalization_ids: tuple

    def __post_init__(self):
        p = tuple(sorted(int(i) for i in self.personalization_ids))
        g = tuple(sorted(int(i) for i in self.generalization_ids))
        if set(p) & set(g):
            raise ValueError("personalization and generalization ids overlap")
        if len(set(p)) != len(p) or len(set(g)) != len(g):
            raise ValueError("duplicate ids in split")
        object.__setattr__(self, "personalization_ids", p)
        object.__setattr__(self, "generalization_ids", g)

    @property
    def n(self) -> int:
        return len(self.personalization_ids) + len(self.generalization_ids)


@dataclass(frozen=True)
class RunMetrics:
    mean_reward: float
    bad_actions: int
    non_optimal_actions: int
    iterations_to_convergence: Optional[int]
    unique_actions: int
    converged: bool
    steps: int
    alignment: Optional[float] = None


def validate_kernel(m: SimilarityMatrix) -> list:
    """Return a list of human-readable invariant violations (empty if valid)."""
    e = np.asarray(m.entries)
    problems = []
    finite = np.isfinite(e)
    if not finite.all():
        bad = np.argwhere(~finite)
        i, j = bad[0]
        problems.append(
            f"non-finite entries: {len(bad)} cells, first at ({i}, {j})")
        return problems
    asym = np.abs(e - e.T)
    if asym.max() > 0:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        problems.append(
            f"asymmetric: max |m[i][j] - m[j][i]| = {asym.max():.6g} "
            f"at ({min(i, j)}, {max(i, j)})")
    diag = np.diag(e)
    short = diag < e.max(axis=1)
    if short.any():
        rows = np.flatnonzero(short)
        problems.append(
            f"diagonal not row maximum in {rows.size} rows, first row {rows[0]}")
    return problems


def nearest_psd(m: SimilarityMatrix, floor: float = PSD_FLOOR) -> SimilarityMatrix:
    """Clip the spectrum of a symmetric kernel from below at ``floor``.

    A matrix whose smallest eigenvalue already reaches ``floor`` is returned
    unchanged.
    """
    e = np.asarray(m.entries)
    if not np.all(np.isfinite(e)):
        raise np.linalg.LinAlgError("cannot eigendecompose a non-finite matrix")
    if not np.array_equal(e, e.T):
        raise ValueError("nearest_psd requires a symmetric matrix")
    w, v = np.linalg.eigh(e)
    if w[0] >= floor:
        return m
    w = np.maximum(w, floor)
    out = (v * w) @ v.T
    out = 0.5 * (out + out.T)
    return SimilarityMatrix(out, m.provenance)


def normalize_kernel(m: SimilarityMatrix) -> SimilarityMatrix:
    """Affinely map entries onto [0, 1] by global min/max, then set diag to 1."""
    e = np.asarray(m.entries, dtype=float)
    lo, hi = e.min(), e.max()
    if hi == lo:
        raise ValueError("cannot normalize a constant matrix")
    out = (e - lo) / (hi - lo)
    np.fill_diagonal(out, 1.0)
    return SimilarityMatrix(out, m.provenance)


def split_random(n: int, rng) -> SplitSpec:
    """Uniformly random partition of ``range(n)`` into floor/ceil halves."""
    if n < 2:
        raise ValueError(f"cannot split {n} actions")
    perm = rng.permutation(n)
    half = n // 2
    return SplitSpec(tuple(perm[:half]), tuple(perm[half:]))
