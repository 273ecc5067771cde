"""One-dimensional optimal transport between projected samples.

Equal sample sizes are the primary contract: there the optimal coupling pairs
order statistics and everything is exact.  Unequal sizes go through the
empirical CDF / quantile composition in :func:`quantile_map`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProjectedSample",
    "sorted_match_displacement",
    "quantile_map",
    "w2sq_1d",
]


@dataclass(frozen=True)
class ProjectedSample:
    """Scalar sample; set sorted=True only if values are already non-decreasing."""

    values: np.ndarray
    sorted: bool = False

    def __post_init__(self):
        v = np.array(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.shape[0] < 1:
            raise ValueError(f"values must be a non-empty 1-d array, got shape {v.shape}")
        if self.sorted and np.any(np.diff(v) < 0):
            raise ValueError("sorted=True but values are not non-decreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _sorted_values(s: ProjectedSample) -> np.ndarray:
    return s.values if s.sorted else np.sort(s.values, kind="stable")


def sorted_match_displacement(src: ProjectedSample, tgt: ProjectedSample) -> np.ndarray:
    """Displacement delta with src + delta the monotone rearrangement onto tgt.

    The rank-r order statistic of src is sent to the rank-r order statistic of
    tgt; ranks come from a stable sort of src, so ties break by original index
    and runs are bit-reproducible.
    """
    if src.n != tgt.n:
        raise ValueError(f"length mismatch: src has n={src.n}, tgt has n={tgt.n}")
    order = np.argsort(src.values, kind="stable")
    mapped = np.empty_like(src.values)
    mapped[order] = _sorted_values(tgt)
    return mapped - src.values


def quantile_map(src: ProjectedSample, tgt: ProjectedSample, queries) -> np.ndarray:
    """Empirical-quantile composition: queries -> F_src -> inverse F_tgt.

    Uses the right-continuous empirical CDF of src and the left-continuous
    generalized inverse of tgt's CDF (value at index ceil(u*m), clamped to
    [1, m]).  The index arithmetic is done in integers, so for equal sizes and
    queries equal to src this coincides exactly with sorted matching whenever
    the source values are distinct; tied source values all collapse to the
    upper matched quantile.
    """
    queries = np.asarray(queries, dtype=float)
    src_sorted = _sorted_values(src)
    tgt_sorted = _sorted_values(tgt)
    n, m = src.n, tgt.n
    counts = np.searchsorted(src_sorted, queries, side="right")  # n * F_src(q)
    idx = -(-counts * m // n)  # ceil(counts * m / n), exact
    idx = np.clip(idx, 1, m)
    return tgt_sorted[idx - 1]


def w2sq_1d(src: ProjectedSample, tgt: ProjectedSample) -> float:
    """Squared 1-d Wasserstein-2 distance: mean squared gap of paired order statistics."""
    if src.n != tgt.n:
        raise ValueError(f"length mismatch: src has n={src.n}, tgt has n={tgt.n}")
    diff = _sorted_values(src) - _sorted_values(tgt)
    return float(np.mean(diff**2))
