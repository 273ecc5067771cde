"""Seedable random geometry: sphere directions and Haar orthonormal bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Direction

__all__ = [
    "RngStream",
    "OrthoBasis",
    "sample_sphere",
    "sample_haar_basis",
    "sample_sphere_stack",
    "sample_haar_stack",
]


class RngStream:
    """Replayable random stream keyed by (seed, stream_id).

    Two streams constructed with the same key replay the same draw sequence
    bit for bit.  Substreams derived via :meth:`child` are statistically
    independent and themselves reproducible, which is how per-run and
    per-purpose randomness (trajectory vs. loss evaluation) is kept separate.
    A stream is owned by one logical task; it is not thread-safe.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(int(p) for p in _path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self._path))
        self.gen = np.random.default_rng(ss)

    def child(self, index: int) -> "RngStream":
        """Independent substream, deterministic in (seed, stream_id, index)."""
        return RngStream(self.seed, self.stream_id, (*self._path, index))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal basis of R^d, columns are the projection directions."""

    cols: np.ndarray

    def __post_init__(self):
        cols = np.array(np.asarray(self.cols, dtype=float))
        if cols.ndim != 2 or cols.shape[0] != cols.shape[1]:
            raise ValueError(f"basis must be square, got shape {cols.shape}")
        d = cols.shape[0]
        if np.abs(cols.T @ cols - np.eye(d)).max() > 1e-10:
            raise ValueError("columns are not orthonormal within 1e-10")
        cols.setflags(write=False)
        object.__setattr__(self, "cols", cols)

    @property
    def d(self) -> int:
        return self.cols.shape[0]

    def column(self, j: int) -> Direction:
        return Direction(self.cols[:, j])


def sample_sphere(d: int, rng: RngStream) -> Direction:
    """Uniform direction on the unit sphere (normalized Gaussian vector)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    while True:
        v = rng.gen.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm >= 1e-300:
            return Direction(v / norm)


def sample_sphere_stack(d: int, count: int, rng: RngStream) -> np.ndarray:
    """count x d array of i.i.d. uniform sphere directions (rows)."""
    if d < 1 or count < 1:
        raise ValueError("d and count must be >= 1")
    v = rng.gen.standard_normal((count, d))
    norms = np.linalg.norm(v, axis=1)
    bad = norms < 1e-300
    while bad.any():
        v[bad] = rng.gen.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(v, axis=1)
        bad = norms < 1e-300
    return v / norms[:, None]


def _haar_from_gaussian(g: np.ndarray):
    """QR of a Gaussian matrix with diagonal sign correction.

    The sign fix (column j of Q scaled by sign(R_jj)) is what makes the map
    Haar-distributed; plain QR output is biased.  Returns (Q, ok) where ok
    flags batches with a safely non-degenerate R diagonal.
    """
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag >= 0.0, 1.0, -1.0)
    ok = np.abs(diag).min(axis=-1) >= 1e-12
    return q * signs[..., None, :], ok


def sample_haar_basis(d: int, rng: RngStream) -> OrthoBasis:
    """Orthonormal basis drawn from the rotation-invariant (Haar) law."""
    if d < 1:
        raise ValueError("d must be >= 1")
    while True:
        q, ok = _haar_from_gaussian(rng.gen.standard_normal((d, d)))
        if ok:
            return OrthoBasis(q)


def sample_haar_stack(d: int, count: int, rng: RngStream) -> np.ndarray:
    """count x d x d stack of independent Haar bases (cheaper than a loop)."""
    if d < 1 or count < 1:
        raise ValueError("d and count must be >= 1")
    q, ok = _haar_from_gaussian(rng.gen.standard_normal((count, d, d)))
    bad = ~ok
    while bad.any():
        q_new, ok_new = _haar_from_gaussian(rng.gen.standard_normal((int(bad.sum()), d, d)))
        q[bad] = q_new
        bad_idx = np.flatnonzero(bad)
        bad[bad_idx[ok_new]] = False
    return q
