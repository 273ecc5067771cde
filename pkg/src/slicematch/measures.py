"""Core containers for empirical and Gaussian measures, projections, moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParticleCloud",
    "GaussianState",
    "Direction",
    "project",
    "second_moment",
    "empirical_covariance",
    "load_cloud_csv",
    "save_cloud_csv",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParticleCloud:
    """Uniform-weight empirical measure: n points as rows of an n x d matrix.

    Immutable after construction; the backing array is marked read-only, so
    instances can be shared freely across threads.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"points must be an n x d matrix, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite (no NaN/Inf)")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean Gaussian summarized by a symmetric positive definite covariance."""

    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError(f"cov must be square, got shape {cov.shape}")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ValueError("cov is not symmetric within 1e-12 relative tolerance")
        if np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ValueError("cov must be positive definite")
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def d(self) -> int:
        return self.cov.shape[0]


@dataclass(frozen=True)
class Direction:
    """Unit vector on the sphere."""

    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=float)
        if vec.ndim != 1 or vec.shape[0] < 1:
            raise ValueError(f"vec must be a length-d vector, got shape {vec.shape}")
        if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise ValueError("vec must have unit norm within 1e-12")
        object.__setattr__(self, "vec", _frozen(vec))

    @property
    def d(self) -> int:
        return self.vec.shape[0]


def project(cloud: ParticleCloud, direction: Direction) -> np.ndarray:
    """Scalar projections <x_i, theta> of every point onto a direction."""
    if direction.d != cloud.d:
        raise ValueError(f"dimension mismatch: cloud has d={cloud.d}, direction has d={direction.d}")
    return cloud.points @ direction.vec


def second_moment(cloud: ParticleCloud) -> float:
    """Mean squared Euclidean norm of the points."""
    return float(np.mean(np.sum(cloud.points**2, axis=1)))


def empirical_covariance(cloud: ParticleCloud) -> np.ndarray:
    """Second-moment matrix about the origin, (1/n) sum_i x_i x_i^T.

    Means are deliberately not subtracted: the scheme centers measures after
    its first full step, and the origin convention keeps the trace identity
    second_moment == trace(empirical_covariance) exact.
    """
    m = cloud.points.T @ cloud.points / cloud.n
    return 0.5 * (m + m.T)


def save_cloud_csv(cloud: ParticleCloud, path) -> None:
    """Write a cloud as headerless CSV, one point per row."""
    np.savetxt(path, cloud.points, delimiter=",", newline="\n", fmt="%.17g")


def load_cloud_csv(path) -> ParticleCloud:
    """Read a headerless CSV of points, one per row."""
    return ParticleCloud(np.loadtxt(path, delimiter=",", ndmin=2))
