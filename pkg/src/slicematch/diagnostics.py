"""Executable checks for the scheme's desk-testable identities and inequalities.

Every statistical check uses a stated multiple of the Monte-Carlo standard
error as slack, so that a mathematically true inequality fails with
probability well below 1e-4 under correct code; a failure beyond that slack
signals an implementation bug, not noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    _grad_sq_split,
    _symmetrize,
    sw2sq_gaussian_mc,
    symmetric_eigs,
    update_covariance_basis,
    w2sq_gaussian,
)
from .randgeom import RngStream, sample_haar_basis, sample_haar_stack, sample_sphere_stack
from .scheme import StepSchedule, step_size

__all__ = [
    "CheckReport",
    "report_lines",
    "check_sw_w2_bound",
    "gradient_matrix_mc",
    "check_pl_inequality",
    "decomposition_terms",
    "check_decomposition",
    "sphere_quartic_moment_check",
    "check_weighted_gradient_bound",
    "check_eigen_recursion",
    "sufficient_condition_accumulator",
    "loglog_slope",
]

_TINY = 1e-15  # absolute guard so exact-zero cases are not float-flaky


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check: passed iff the stated relation holds within slack."""

    name: str
    passed: bool
    lhs: float
    rhs: float
    slack: float
    detail: str = ""

    def to_line(self) -> str:
        return f"{self.name}\t{str(self.passed).lower()}\t{self.lhs:.12g}\t{self.rhs:.12g}\t{self.slack:.12g}"


def report_lines(reports) -> str:
    return "\n".join(r.to_line() for r in reports) + "\n"


def _require_diagonal_in_range(name, mat, m, M):
    mat = np.asarray(mat, dtype=float)
    diag = np.diag(mat)
    off = mat - np.diag(diag)
    if np.abs(off).max() > 1e-12 * max(1.0, diag.max()):
        raise ValueError(f"{name} must be diagonal")
    if diag.min() < m - 1e-12 or diag.max() > M + 1e-12:
        raise ValueError(f"{name} diagonal entries must lie in [{m}, {M}]")


def check_sw_w2_bound(sigma, lam, m, M, L, rng: RngStream) -> CheckReport:
    """Sliced-vs-full comparison for diagonal Gaussians.

    Verifies SW2^2 >= m / (M d (d+2)) * W2^2 for diagonal covariances with
    entries in [m, M], allowing 4 standard errors on the Monte-Carlo side.
    """
    if not 0 < m <= M:
        raise ValueError("need 0 < m <= M")
    _require_diagonal_in_range("sigma", sigma, m, M)
    _require_diagonal_in_range("lambda", lam, m, M)
    d = np.asarray(sigma).shape[0]
    sw = sw2sq_gaussian_mc(sigma, lam, L, rng)
    bound = m / (M * d * (d + 2)) * w2sq_gaussian(sigma, lam)
    slack = 4.0 * sw.sem
    return CheckReport(
        name="sw_w2_bound",
        passed=sw.value + slack + _TINY >= bound,
        lhs=sw.value,
        rhs=bound,
        slack=slack,
        detail=f"d={d} L={L}",
    )


def gradient_matrix_mc(sigma, lam, L, rng: RngStream) -> np.ndarray:
    """Monte-Carlo gradient matrix (d/L) sum_j (1 - tau_j) theta_j theta_j^T, symmetrized."""
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    thetas = sample_sphere_stack(d, L, rng)
    taus = np.sqrt(
        np.einsum("ij,jk,ik->i", thetas, lam, thetas)
        / np.einsum("ij,jk,ik->i", thetas, sigma, thetas)
    )
    w = (1.0 - taus) * d / L
    return _symmetrize((thetas * w[:, None]).T @ thetas)


def _grad_norm_sq_mc(sigma, lam, L, rng: RngStream, batches: int = 10):
    """Unbiased estimate of Tr(A Sigma A^T) with a batch-spread standard error."""
    vals = np.array([_grad_sq_split(sigma, lam, max(2, L // batches), rng) for _ in range(batches)])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(batches))


def check_pl_inequality(sigma, lam, m, M, L, rng: RngStream) -> CheckReport:
    """Gradient-domination check for commuting Gaussian pairs with spectra in [m, M].

    Tests F <= (C_d / 2)(1 + M/m) ||grad F||^2 with C_d = d (d+2) M / m,
    F = (d/2) SW2^2 and ||grad F||^2 = Tr(A Sigma A^T), both Monte-Carlo,
    with 4 standard errors of slack on each side.
    """
    if not 0 < m <= M:
        raise ValueError("need 0 < m <= M")
    sigma = np.asarray(sigma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    d = sigma.shape[0]
    comm = np.linalg.norm(sigma @ lam - lam @ sigma)
    if comm > 1e-10 * np.linalg.norm(sigma) * np.linalg.norm(lam):
        raise ValueError("sigma and lambda must commute (co-diagonalizable)")
    for name, mat in (("sigma", sigma), ("lambda", lam)):
        eigs = symmetric_eigs(mat)
        if eigs[0] < m - 1e-9 or eigs[-1] > M + 1e-9:
            raise ValueError(f"{name} spectrum must lie in [{m}, {M}]")
    sw = sw2sq_gaussian_mc(sigma, lam, L, rng)
    f_val = 0.5 * d * sw.value
    f_sem = 0.5 * d * sw.sem
    grad_sq, grad_sem = _grad_norm_sq_mc(sigma, lam, L, rng)
    c_pl = 0.5 * d * (d + 2) * M / m * (1.0 + M / m)
    rhs = c_pl * grad_sq
    slack = 4.0 * (f_sem + c_pl * grad_sem)
    return CheckReport(
        name="pl_inequality",
        passed=f_val <= rhs + slack + _TINY,
        lhs=f_val,
        rhs=rhs,
        slack=slack,
        detail=f"d={d} L={L} C_d(1+M/m)/2={c_pl:.6g}",
    )


def _basis_transport_stack(sigma, lam, bases) -> np.ndarray:
    """Stack of linear slice-matching matrices P diag(tau) P^T, one per basis."""
    qs = np.einsum("lji,jk,lki->li", bases, sigma, bases)
    ql = np.einsum("lji,jk,lki->li", bases, lam, bases)
    taus = np.sqrt(ql / qs)
    return np.einsum("lij,lj,lkj->lik", bases, taus, bases)


def decomposition_terms(sigma, lam, L_basis, L_dir, rng: RngStream):
    """Monte-Carlo terms of the objective split: (2F, grad_term, var_term, sem).

    2F comes from single directions (d * SW2^2); the gradient and variance
    terms come from a shared basis sample whose split is algebraically exact,
    so grad_term + var_term is itself an unbiased estimate of 2F.  sem is the
    combined standard error of the two sides.
    """
    sigma = np.asarray(sigma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    d = sigma.shape[0]
    sw = sw2sq_gaussian_mc(sigma, lam, L_dir, rng)
    bases = sample_haar_stack(d, L_basis, rng)
    t_stack = _basis_transport_stack(sigma, lam, bases)
    t_bar = t_stack.mean(axis=0)
    a = np.eye(d) - t_bar
    grad_term = float(np.trace(a @ sigma @ a.T))
    dev = t_bar[None, :, :] - t_stack
    var_term = float(np.einsum("lij,jk,lik->l", dev, sigma, dev).mean())
    # per-basis totals ||Id - T_P||^2_sigma; their mean equals grad + var exactly
    dev0 = np.eye(d)[None, :, :] - t_stack
    totals = np.einsum("lij,jk,lik->l", dev0, sigma, dev0)
    sem_rhs = float(totals.std(ddof=1) / np.sqrt(L_basis)) if L_basis > 1 else 0.0
    sem = float(np.hypot(d * sw.sem, sem_rhs))
    return d * sw.value, grad_term, var_term, sem


def check_decomposition(sigma, lam, L_basis, L_dir, rng: RngStream) -> CheckReport:
    """Splits twice the objective into squared gradient norm plus basis variance.

    Passes when |2F - (grad + var)| is within 5 combined standard errors of
    the two independent Monte-Carlo sides.
    """
    lhs, grad_term, var_term, sem = decomposition_terms(sigma, lam, L_basis, L_dir, rng)
    residual = abs(lhs - (grad_term + var_term))
    return CheckReport(
        name="gradient_variance_decomposition",
        passed=residual <= 5.0 * sem + _TINY,
        lhs=lhs,
        rhs=grad_term + var_term,
        slack=5.0 * sem,
        detail=f"grad={grad_term:.6g} var={var_term:.6g}",
    )


def sphere_quartic_moment_check(gamma_mat, L, rng: RngStream) -> CheckReport:
    """Monte-Carlo fourth moment of a sphere quadratic form against its closed form.

    E[(theta^T G theta)^2] = (2 Tr(G^2) + Tr(G)^2) / (d (d+2)) for theta
    uniform on the sphere; slack is 4 standard errors.
    """
    g = np.asarray(gamma_mat, dtype=float)
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - g.T).max() > 1e-10 * scale:
        raise ValueError("gamma_mat must be symmetric")
    d = g.shape[0]
    thetas = sample_sphere_stack(d, L, rng)
    vals = np.einsum("ij,jk,ik->i", thetas, g, thetas) ** 2
    mc = float(vals.mean())
    sem = float(vals.std(ddof=1) / np.sqrt(L)) if L > 1 else 0.0
    closed = (2.0 * float(np.trace(g @ g)) + float(np.trace(g)) ** 2) / (d * (d + 2))
    slack = 4.0 * sem
    return CheckReport(
        name="sphere_quartic_moment",
        passed=abs(mc - closed) <= slack + _TINY,
        lhs=mc,
        rhs=closed,
        slack=slack,
        detail=f"d={d} L={L}",
    )


def check_weighted_gradient_bound(run_records, sched: StepSchedule, m2_target, f0) -> CheckReport:
    """Weighted average of squared gradient norms against the descent bound.

    run_records is a list of per-run RunRecord lists covering every iteration
    k = 0..K with grad_sq populated.  Checks
    sum_k w_k mean_runs(grad_sq_k) <= (f0 + 4 M2(target) sum gamma_k^2) / sum gamma_k
    with w_k = gamma_k / sum gamma_k and 4 standard errors (over runs) of slack.
    """
    if not run_records:
        raise ValueError("need at least one run")
    ks = [r.k for r in run_records[0]]
    if ks != list(range(len(ks))):
        raise ValueError("records must cover every iteration k = 0..K (eval_every=1)")
    per_run = []
    for records in run_records:
        if [r.k for r in records] != ks:
            raise ValueError("all runs must share the same iteration grid")
        g = [r.grad_sq for r in records]
        if any(v is None for v in g):
            raise ValueError("missing gradient logs: run flows with grad_dirs set")
        per_run.append(np.asarray(g, dtype=float))
    gammas = np.array([step_size(sched, k) for k in ks])
    gsum = gammas.sum()
    weighted = np.array([float(gammas @ g) / gsum for g in per_run])
    lhs = float(weighted.mean())
    sem = float(weighted.std(ddof=1) / np.sqrt(len(weighted))) if len(weighted) > 1 else 0.0
    rhs = (f0 + 4.0 * m2_target * float(gammas @ gammas)) / gsum
    slack = 4.0 * sem
    return CheckReport(
        name="weighted_gradient_bound",
        passed=lhs <= rhs + slack + _TINY,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        detail=f"alpha={sched.alpha} K={ks[-1]} runs={len(run_records)}",
    )


def check_eigen_recursion(sigma0, lam, sched: StepSchedule, K, rng: RngStream, slack=1e-8) -> CheckReport:
    """Per-step spectral sandwich along a basis-mode flow.

    At every step, with f_j = 1 - gamma + gamma tau_j over the basis columns:
    min_j f_j * sqrt(lmin(S_k)) <= sqrt(lmin(S_{k+1})) and
    sqrt(lmax(S_{k+1})) <= max_j f_j * sqrt(lmax(S_k)).
    The trajectory replays the one run_gaussian_flow would produce in basis
    mode from the same stream.
    """
    sigma = np.array(np.asarray(sigma0, dtype=float))
    lam = np.asarray(lam, dtype=float)
    d = sigma.shape[0]
    traj = rng.child(0)
    worst_lo = np.inf
    worst_hi = np.inf
    for k in range(K):
        gamma = step_size(sched, k)
        basis = sample_haar_basis(d, traj)
        qs = np.einsum("ji,jk,ki->i", basis.cols, sigma, basis.cols)
        ql = np.einsum("ji,jk,ki->i", basis.cols, lam, basis.cols)
        factors = 1.0 - gamma + gamma * np.sqrt(ql / qs)
        old = symmetric_eigs(sigma)
        sigma = update_covariance_basis(sigma, lam, basis, gamma)
        new = symmetric_eigs(sigma)
        worst_lo = min(worst_lo, float(np.sqrt(new[0]) - factors.min() * np.sqrt(old[0])))
        worst_hi = min(worst_hi, float(factors.max() * np.sqrt(old[-1]) - np.sqrt(new[-1])))
    return CheckReport(
        name="eigen_recursion",
        passed=worst_lo >= -slack and worst_hi >= -slack,
        lhs=worst_lo,
        rhs=worst_hi,
        slack=slack,
        detail=f"worst lower/upper margins over {K} steps, d={d}",
    )


def sufficient_condition_accumulator(sigmas, lam, sched: StepSchedule, p, L, rng: RngStream) -> np.ndarray:
    """Partial sums sum_k gamma_k E_theta[(theta^T S_k theta / theta^T L theta)^p - 1].

    Informational only: boundedness of this series is the open sufficient
    condition for spectral control under a general target, so no verdict is
    attached.  Per-step expectations are Monte-Carlo over L directions.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    lam = np.asarray(lam, dtype=float)
    d = lam.shape[0]
    terms = np.empty(len(sigmas))
    for k, sigma in enumerate(sigmas):
        thetas = sample_sphere_stack(d, L, rng)
        ratio = np.einsum("ij,jk,ik->i", thetas, np.asarray(sigma, dtype=float), thetas) / np.einsum(
            "ij,jk,ik->i", thetas, lam, thetas
        )
        terms[k] = step_size(sched, k) * float(np.mean(ratio**p - 1.0))
    return np.cumsum(terms)


def loglog_slope(records, k_lo, k_hi) -> float:
    """Least-squares slope of log(mean sw2sq) against log k on a window.

    records may mix several runs; rows are grouped by k and averaged.  Needs
    at least 10 distinct positive k in [k_lo, k_hi] and strictly positive
    mean losses throughout.
    """
    by_k = {}
    for r in records:
        if k_lo <= r.k <= k_hi and r.k > 0:
            by_k.setdefault(r.k, []).append(r.sw2sq)
    if len(by_k) < 10:
        raise ValueError(f"need at least 10 records in window, got {len(by_k)}")
    ks = np.array(sorted(by_k))
    means = np.array([np.mean(by_k[k]) for k in ks])
    if means.min() <= 0.0:
        raise ValueError("non-positive losses in window")
    return float(np.polyfit(np.log(ks), np.log(means), 1)[0])
