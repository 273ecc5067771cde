"""Slice-matching maps on particle clouds and the stochastic iterative scheme."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .measures import Direction, ParticleCloud, empirical_covariance, second_moment
from .ot1d import ProjectedSample, sorted_match_displacement
from .randgeom import OrthoBasis, RngStream, sample_haar_basis, sample_sphere, sample_sphere_stack

__all__ = [
    "StepSchedule",
    "SamplingMode",
    "RunRecord",
    "step_size",
    "slice_map_basis",
    "slice_map_single",
    "run_scheme",
    "sw2sq_mc",
]


@dataclass(frozen=True)
class StepSchedule:
    """Step sequence gamma_k = (k + offset)^(-alpha).

    With offset=1 the first step is full (gamma_0 = 1), which is what makes
    the second moment of the iterates drop to the target's from k=1 on.
    alpha > 1/2 gives square-summable but non-summable steps.
    """

    alpha: float
    offset: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.offset < 1.0:
            raise ValueError(f"offset must be >= 1, got {self.offset}")


def step_size(sched: StepSchedule, k: int) -> float:
    """gamma_k for iteration index k >= 0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return float((k + sched.offset) ** (-sched.alpha))


class SamplingMode(enum.Enum):
    """Projection sampling per iteration: a full orthonormal basis or one direction."""

    BASIS = "basis"
    SINGLE = "single"


@dataclass(frozen=True)
class RunRecord:
    """One log row of an iterative run.

    grad_sq is only populated by gradient-logging Gaussian flows (used by the
    weighted-gradient diagnostic); lambda_min/lambda_max come from the
    empirical covariance for particle runs and from the exact covariance for
    Gaussian flows.
    """

    k: int
    gamma: float
    sw2sq: float
    lambda_min: float
    lambda_max: float
    m2: float
    grad_sq: Optional[float] = None

    def __post_init__(self):
        if self.sw2sq < 0:
            raise ValueError("sw2sq must be non-negative")
        if self.lambda_min > self.lambda_max:
            raise ValueError("lambda_min must not exceed lambda_max")


def _matched_projections(src_proj: np.ndarray, tgt_proj: np.ndarray) -> np.ndarray:
    """Columnwise monotone rearrangement of src projections onto tgt projections."""
    matched = np.empty_like(src_proj)
    for j in range(src_proj.shape[1]):
        order = np.argsort(src_proj[:, j], kind="stable")
        matched[order, j] = np.sort(tgt_proj[:, j], kind="stable")
    return matched


def _check_pair(src: ParticleCloud, tgt: ParticleCloud):
    if src.d != tgt.d:
        raise ValueError(f"dimension mismatch: src d={src.d}, tgt d={tgt.d}")
    if src.n != tgt.n:
        raise ValueError(f"size mismatch: src n={src.n}, tgt n={tgt.n}")


def slice_map_basis(src: ParticleCloud, tgt: ParticleCloud, basis: OrthoBasis) -> ParticleCloud:
    """Match all d orthogonal projections at once: x' = sum_l t_l(theta_l^T x) theta_l.

    Exactly matches the target's mean and second moment (each matched column
    is a permutation of the target's projected values, and the basis is
    orthonormal).
    """
    _check_pair(src, tgt)
    if basis.d != src.d:
        raise ValueError(f"dimension mismatch: clouds have d={src.d}, basis has d={basis.d}")
    matched = _matched_projections(src.points @ basis.cols, tgt.points @ basis.cols)
    return ParticleCloud(matched @ basis.cols.T)


def slice_map_single(src: ParticleCloud, tgt: ParticleCloud, direction: Direction) -> ParticleCloud:
    """Match one projection: x' = x + (t(theta^T x) - theta^T x) theta."""
    _check_pair(src, tgt)
    if direction.d != src.d:
        raise ValueError(f"dimension mismatch: clouds have d={src.d}, direction has d={direction.d}")
    delta = sorted_match_displacement(
        ProjectedSample(src.points @ direction.vec),
        ProjectedSample(tgt.points @ direction.vec),
    )
    return ParticleCloud(src.points + delta[:, None] * direction.vec)


def sw2sq_mc(a: ParticleCloud, b: ParticleCloud, L: int, rng: RngStream) -> float:
    """Monte-Carlo sliced squared distance: mean of 1-d W2^2 over L uniform directions."""
    _check_pair(a, b)
    if L < 1:
        raise ValueError("L must be >= 1")
    total = 0.0
    chunk = max(1, (1 << 22) // a.n)
    done = 0
    while done < L:
        m = min(chunk, L - done)
        thetas = sample_sphere_stack(a.d, m, rng)
        pa = np.sort(a.points @ thetas.T, axis=0)
        pb = np.sort(b.points @ thetas.T, axis=0)
        total += float(np.mean((pa - pb) ** 2, axis=0).sum())
        done += m
    return total / L


def _eval_record(points, tgt, k, gamma, L_sw, rng_eval) -> RunRecord:
    cloud = ParticleCloud(points)
    cov = empirical_covariance(cloud)
    eigs = np.linalg.eigvalsh(cov)
    return RunRecord(
        k=k,
        gamma=gamma,
        sw2sq=sw2sq_mc(cloud, tgt, L_sw, rng_eval),
        lambda_min=float(eigs[0]),
        lambda_max=float(eigs[-1]),
        m2=second_moment(cloud),
    )


def run_scheme(
    src: ParticleCloud,
    tgt: ParticleCloud,
    sched: StepSchedule,
    K: int,
    mode: SamplingMode,
    rng: RngStream,
    eval_every: int = 10,
    L_sw: int = 500,
):
    """Run K slice-matching iterations of src toward tgt.

    Each iteration draws fresh projection directions (a Haar basis or a single
    uniform direction, depending on mode) and moves the points by
    x <- (1 - gamma_k) x + gamma_k T(x).  Every eval_every iterations (and at
    k=0 and k=K) a RunRecord is appended with the Monte-Carlo sliced loss
    against tgt, extreme eigenvalues of the empirical covariance, and the
    second moment.  Loss evaluation uses an independent substream so that
    measuring the loss never perturbs the trajectory; the whole run is
    deterministic given the input stream's key.

    Returns (records, final_cloud).
    """
    _check_pair(src, tgt)
    if K < 1:
        raise ValueError("K must be >= 1")
    if eval_every < 1:
        raise ValueError("eval_every must be >= 1")
    rng_traj = rng.child(0)
    rng_eval = rng.child(1)

    pts = np.array(src.points)
    records = [_eval_record(pts, tgt, 0, step_size(sched, 0), L_sw, rng_eval)]
    for k in range(K):
        gamma = step_size(sched, k)
        if mode is SamplingMode.BASIS:
            basis = sample_haar_basis(src.d, rng_traj)
            matched = _matched_projections(pts @ basis.cols, tgt.points @ basis.cols)
            pts = (1.0 - gamma) * pts + gamma * (matched @ basis.cols.T)
        else:
            theta = sample_sphere(src.d, rng_traj).vec
            sp = pts @ theta
            order = np.argsort(sp, kind="stable")
            mapped = np.empty_like(sp)
            mapped[order] = np.sort(tgt.points @ theta, kind="stable")
            pts = pts + gamma * (mapped - sp)[:, None] * theta
        done = k + 1
        if done % eval_every == 0 or done == K:
            records.append(_eval_record(pts, tgt, done, step_size(sched, done), L_sw, rng_eval))
    return records, ParticleCloud(pts)
