"""Rank-correlation alignment between kernels, plus binned summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .accel import average_ranks
from .domain import SimilarityMatrix, SplitSpec


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation is requested for a constant vector."""


@dataclass(frozen=True)
class AlignmentVariant:
    kind: str = "full"
    split: Optional[SplitSpec] = None

    def __post_init__(self):
        if self.kind not in ("full", "pers", "cross"):
            raise ValueError(f"unknown alignment variant {self.kind!r}")
        if (self.kind == "full") != (self.split is None):
            raise ValueError("a split is required for pers/cross and "
                             "forbidden for full")


FULL = AlignmentVariant("full")


@dataclass(frozen=True)
class Bin:
    center: float
    mean: float
    standard_error: float
    count: int


@dataclass(frozen=True)
class BinnedSeries:
    bin_width: float
    bins: tuple


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def spearman(x, y) -> float:
    """Spearman correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two vectors of equal length")
    if x.size < 2:
        raise ValueError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("correlation with a constant vector")
    return _pearson(average_ranks(x), average_ranks(y))


def spearman_permutation_test(x, y, n_permutations=10_000, rng=None,
                              batch=500):
    """Spearman rho with a two-sided permutation p-value.

    The p-value counts shuffles at least as extreme as the observed
    statistic, with the usual +1 correction so it is never zero.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = spearman(x, y)
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx = (rx - rx.mean()) / np.linalg.norm(rx - rx.mean())
    ry = (ry - ry.mean()) / np.linalg.norm(ry - ry.mean())
    obs = abs(float(np.dot(rx, ry))) - 1e-12
    extreme = 0
    done = 0
    while done < n_permutations:
        m = min(batch, n_permutations - done)
        perms = rng.permuted(np.tile(ry, (m, 1)), axis=1)
        extreme += int(np.count_nonzero(np.abs(perms @ rx) >= obs))
        done += m
    return rho, (extreme + 1) / (n_permutations + 1)


def pair_vector(m: SimilarityMatrix, variant: AlignmentVariant = FULL) -> np.ndarray:
    """Flatten the kernel entries that a variant compares.

    ``full``: the strict upper triangle in row-major order. ``pers``: the
    same, restricted to personalization ids. ``cross``: every
    (personalization, generalization) pair, both ascending.
    """
    e = np.asarray(m.entries)
    n = e.shape[0]
    if variant.kind == "full":
        iu = np.triu_indices(n, k=1)
        return e[iu]
    p = np.asarray(variant.split.personalization_ids, dtype=int)
    g = np.asarray(variant.split.generalization_ids, dtype=int)
    for ids in (p, g):
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise ValueError(f"split ids out of range for a {n}x{n} kernel")
    if variant.kind == "pers":
        sub = e[np.ix_(p, p)]
        return sub[np.triu_indices(p.size, k=1)]
    return e[np.ix_(p, g)].ravel()


def alignment(a: SimilarityMatrix, b: SimilarityMatrix,
              variant: AlignmentVariant = FULL) -> float:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    return spearman(pair_vector(a, variant), pair_vector(b, variant))


def bin_series(points: Iterable, bin_width: float = 0.05) -> BinnedSeries:
    """Group (alignment, metric) points into fixed-width alignment bins.

    Single-point bins report a standard error of 0.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if pts.size == 0:
        return BinnedSeries(bin_width, ())
    keys = np.floor(pts[:, 0] / bin_width).astype(np.int64)
    bins = []
    for key in np.unique(keys):
        vals = pts[keys == key, 1]
        se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        bins.append(Bin((key + 0.5) * bin_width, float(vals.mean()), se,
                        int(vals.size)))
    return BinnedSeries(bin_width, tuple(bins))
