"""Experiment runner behind the command-line interface.

Experiments sweep a (dimension, step-exponent, run) grid, log one CSV per
(experiment, d, alpha) cell with the bit-exact header
``run_id,seed,dim,alpha,mode,k,gamma,sw2sq,lambda_min,lambda_max,m2``, and
write a plain-text summary.  Everything is a pure function of the config and
master seed: reruns produce byte-identical CSVs regardless of worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .gaussian import run_gaussian_flow, sw2sq_gaussian_mc
from .measures import ParticleCloud, second_moment
from .randgeom import RngStream, sample_haar_basis
from .scheme import SamplingMode, StepSchedule, run_scheme

__all__ = [
    "CSV_HEADER",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config_file",
    "init_source_covariance",
    "init_gaussian_mixture_cloud",
    "run_experiment",
    "run_check_campaign",
    "THEOREM_CHECKS",
]

CSV_HEADER = "run_id,seed,dim,alpha,mode,k,gamma,sw2sq,lambda_min,lambda_max,m2"

EXPERIMENTS = (
    "gauss-isotropic",
    "gauss-general",
    "particles-mixture",
    "particles-gauss-target",
    "single-vs-basis",
    "diagnostics",
)

_TARGET_STREAM = 2**31  # reserved stream id so targets never collide with run streams


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


@dataclass
class ExperimentConfig:
    experiment: str
    dims: list = field(default_factory=lambda: [5])
    alphas: list = field(default_factory=lambda: [0.51])
    K: int = 1000
    n_runs: int = 10
    n_particles: int = 500
    seed: int = 0
    L_sw: int = 500
    eval_every: int = 10
    out_dir: str = "results"

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got '{self.experiment}'")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ConfigError("dims entries must be >= 1")
        if not self.alphas or any(not 0.0 <= a < 1.0 for a in self.alphas):
            raise ConfigError("alphas entries must lie in [0, 1)")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if self.L_sw < 1:
            raise ConfigError("L_sw must be >= 1")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")


_INT_KEYS = {"K", "n_runs", "n_particles", "seed", "L_sw", "eval_every"}


def parse_config_file(path) -> ExperimentConfig:
    """Read a flat `key = value` config; '#' starts a comment, lists are comma-separated."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise ConfigError(f"unknown config key '{key}' (line {lineno})")
        try:
            if key == "dims":
                values[key] = [int(v) for v in val.split(",")]
            elif key == "alphas":
                values[key] = [float(v) for v in val.split(",")]
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"bad value for key '{key}': {val}") from exc
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    return ExperimentConfig(**values)


def init_source_covariance(d: int, rng: RngStream) -> np.ndarray:
    """Random SPD start: Haar-rotated diagonal with entries log-uniform on [0.1, 10]."""
    q = sample_haar_basis(d, rng).cols
    spec = np.exp(rng.gen.uniform(np.log(0.1), np.log(10.0), size=d))
    m = (q * spec) @ q.T
    return 0.5 * (m + m.T)


def init_gaussian_mixture_cloud(d: int, n: int, rng: RngStream) -> ParticleCloud:
    """n draws from an equal-weight 3-component Gaussian mixture.

    Component means are uniform in [-5, 5]^d with unit isotropic variance;
    the component count and spread are this artifact's convention.
    """
    means = rng.gen.uniform(-5.0, 5.0, size=(3, d))
    comps = rng.gen.integers(0, 3, size=n)
    return ParticleCloud(means[comps] + rng.gen.standard_normal((n, d)))


def _general_target_diag(d: int, rng: RngStream) -> np.ndarray:
    # diagonal entries ~ Normal(10, 1); negative draws are discarded
    vals = np.empty(d)
    for i in range(d):
        v = -1.0
        while v <= 0.0:
            v = rng.gen.normal(10.0, 1.0)
        vals[i] = v
    return np.diag(vals)


def _cell_stream(seed: int, run_id: int, d_idx: int, a_idx: int) -> RngStream:
    return RngStream(seed, run_id).child(d_idx).child(a_idx)


def _rows_from_records(records, run_id, seed, d, alpha, mode):
    return [
        (run_id, seed, d, alpha, mode, r.k, r.gamma, r.sw2sq, r.lambda_min, r.lambda_max, r.m2)
        for r in records
    ]


def _run_cell(task):
    """One (experiment, d, alpha, run) unit of work; returns ((d, alpha), rows)."""
    cfg: ExperimentConfig = task["cfg"]
    d, alpha = task["d"], task["alpha"]
    d_idx, a_idx, run_id = task["d_idx"], task["a_idx"], task["run_id"]
    sched = StepSchedule(alpha=alpha)
    cell = _cell_stream(cfg.seed, run_id, d_idx, a_idx)

    if cfg.experiment in ("gauss-isotropic", "gauss-general", "single-vs-basis"):
        sigma0 = init_source_covariance(d, cell.child(0))
        if cfg.experiment == "gauss-general":
            lam = _general_target_diag(d, RngStream(cfg.seed, _TARGET_STREAM).child(d_idx))
        else:
            lam = np.eye(d)
        rows = []
        modes = (
            [(SamplingMode.BASIS, 1), (SamplingMode.SINGLE, 2)]
            if cfg.experiment == "single-vs-basis"
            else [(SamplingMode.BASIS, 1)]
        )
        for mode, child_idx in modes:
            records = run_gaussian_flow(
                sigma0, lam, sched, cfg.K, mode, cell.child(child_idx),
                L_sw=cfg.L_sw, eval_every=cfg.eval_every,
            )
            rows += _rows_from_records(records, run_id, cfg.seed, d, alpha, mode.value)
        return (d, alpha), rows

    if cfg.experiment == "particles-mixture":
        src = init_gaussian_mixture_cloud(d, cfg.n_particles, cell.child(0))
        tgt = init_gaussian_mixture_cloud(d, cfg.n_particles, cell.child(1))
    elif cfg.experiment == "particles-gauss-target":
        src = init_gaussian_mixture_cloud(d, cfg.n_particles, cell.child(0))
        tgt = ParticleCloud(cell.child(1).gen.standard_normal((cfg.n_particles, d)))
    else:
        raise ConfigError(f"unhandled experiment '{cfg.experiment}'")
    records, _ = run_scheme(
        src, tgt, sched, cfg.K, SamplingMode.BASIS, cell.child(2),
        eval_every=cfg.eval_every, L_sw=cfg.L_sw,
    )
    return (d, alpha), _rows_from_records(records, run_id, cfg.seed, d, alpha, "basis")


def _format_row(row) -> str:
    run_id, seed, d, alpha, mode, k, gamma, sw2, lmin, lmax, m2 = row
    return f"{run_id},{seed},{d},{alpha!r},{mode},{k},{gamma!r},{sw2!r},{lmin!r},{lmax!r},{m2!r}"


def _csv_name(experiment, d, alpha) -> str:
    return f"{experiment}_d{d}_alpha{alpha:g}.csv"


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, quick_checks: bool = False) -> list:
    """Execute the configured experiment grid; returns the paths written.

    The (d, alpha, run) grid is embarrassingly parallel; results are sorted
    into a deterministic order before writing, so output bytes do not depend
    on worker count or scheduling.  quick_checks shrinks the diagnostics
    campaign (smoke testing only).
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"out_dir is not writable: {exc}") from exc

    if cfg.experiment == "diagnostics":
        reports, notes = run_check_campaign(cfg.seed, quick=quick_checks)
        check_path = out / "checks.tsv"
        check_path.write_text(diag.report_lines(reports))
        summary = [f"diagnostics: {sum(r.passed for r in reports)}/{len(reports)} checks passed"]
        summary += ["  " + r.to_line() for r in reports]
        summary += ["note: " + n for n in notes]
        (out / "summary.txt").write_text("\n".join(summary) + "\n")
        return [check_path, out / "summary.txt"]

    tasks = [
        {"cfg": cfg, "d": d, "alpha": a, "d_idx": i, "a_idx": j, "run_id": r}
        for i, d in enumerate(cfg.dims)
        for j, a in enumerate(cfg.alphas)
        for r in range(cfg.n_runs)
    ]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    by_cell = {}
    for key, rows in results:
        by_cell.setdefault(key, []).extend(rows)

    written = []
    summary_lines = [f"experiment = {cfg.experiment}", f"seed = {cfg.seed}", ""]
    for (d, alpha) in sorted(by_cell):
        rows = sorted(by_cell[(d, alpha)], key=lambda r: (r[4], r[0], r[5]))
        path = out / _csv_name(cfg.experiment, d, alpha)
        path.write_text(CSV_HEADER + "\n" + "\n".join(_format_row(r) for r in rows) + "\n")
        written.append(path)
        for mode in sorted({r[4] for r in rows}):
            finals = [r[7] for r in rows if r[4] == mode and r[5] == cfg.K]
            starts = [r[7] for r in rows if r[4] == mode and r[5] == 0]
            summary_lines.append(
                f"d={d} alpha={alpha:g} mode={mode}: "
                f"sw2sq start mean={np.mean(starts):.6g} "
                f"final mean={np.mean(finals):.6g} min={np.min(finals):.6g} max={np.max(finals):.6g}"
            )
    if cfg.experiment == "single-vs-basis":
        summary_lines.append("")
        summary_lines += _fluctuation_summary(by_cell, cfg)
    summary_path = out / "summary.txt"
    summary_path.write_text("\n".join(summary_lines) + "\n")
    written.append(summary_path)
    return written


def _lambda_min_variance(rows, mode, run_id, k_lo, k_hi) -> float:
    vals = [r[8] for r in rows if r[4] == mode and r[0] == run_id and k_lo <= r[5] <= k_hi]
    return float(np.var(vals))


def _fluctuation_summary(by_cell, cfg: ExperimentConfig) -> list:
    """Per (d, alpha): on how many shared-start runs the single-direction
    lambda_min wanders more (higher iteration-window variance) than basis mode."""
    lines = []
    k_lo, k_hi = 1, cfg.K
    for (d, alpha) in sorted(by_cell):
        rows = by_cell[(d, alpha)]
        wins = 0
        for run_id in range(cfg.n_runs):
            v_single = _lambda_min_variance(rows, "single", run_id, k_lo, k_hi)
            v_basis = _lambda_min_variance(rows, "basis", run_id, k_lo, k_hi)
            wins += v_single > v_basis
        lines.append(
            f"d={d} alpha={alpha:g}: lambda_min variance larger in single mode "
            f"on {wins}/{cfg.n_runs} shared-start runs (window k in [{k_lo}, {k_hi}])"
        )
    return lines


# ---------------------------------------------------------------------------
# theorem-check campaign (the `slicematch check` subcommand)

THEOREM_CHECKS = frozenset(
    {
        "sw_w2_bound_campaign",
        "pl_inequality_campaign",
        "gradient_variance_campaign",
        "sphere_quartic_campaign",
        "eigen_recursion",
        "isotropic_lambda_min_bound",
        "isotropic_trace_bound",
        "particle_moment_bound",
        "weighted_gradient_alpha0.9",
        "weighted_gradient_alpha0.51",
    }
)


def _aggregate(name, sub_reports, detail="") -> diag.CheckReport:
    failures = [r for r in sub_reports if not r.passed]
    msg = f"instances={len(sub_reports)} failures={len(failures)}"
    if detail:
        msg += " " + detail
    if failures:
        msg += " first_failure=" + failures[0].to_line().replace("\t", " ")
    return diag.CheckReport(
        name=name, passed=not failures, lhs=float(len(failures)), rhs=0.0, slack=0.0, detail=msg
    )


def _random_codiag_pair(d, lo, hi, rng: RngStream, rotate: bool):
    a = rng.gen.uniform(lo, hi, size=d)
    b = rng.gen.uniform(lo, hi, size=d)
    if not rotate:
        return np.diag(a), np.diag(b)
    q = sample_haar_basis(d, rng).cols
    return 0.5 * ((q * a) @ q.T + ((q * a) @ q.T).T), 0.5 * ((q * b) @ q.T + ((q * b) @ q.T).T)


def run_check_campaign(seed: int = 20240601, quick: bool = False):
    """Run every theorem-backed check at desk scale; returns (reports, notes)."""
    rng = RngStream(seed, 0)
    reports = []
    notes = []

    # sliced-vs-full lower bound, diagonal pairs with spectra in [1, 4]
    n_pairs = 60 if quick else 1000
    r = rng.child(1)
    subs = []
    for i in range(n_pairs):
        d = (2, 5, 10)[i % 3]
        sig, lam = _random_codiag_pair(d, 1.0, 4.0, r, rotate=False)
        subs.append(diag.check_sw_w2_bound(sig, lam, 1.0, 4.0, 1024 if quick else 2048, r))
    reports.append(_aggregate("sw_w2_bound_campaign", subs, "spectra [1,4] d in {2,5,10}"))

    # gradient-domination inequality, commuting pairs with spectra in [0.5, 2]
    n_pairs = 20 if quick else 100
    r = rng.child(2)
    subs = []
    for i in range(n_pairs):
        d = (2, 5, 10)[i % 3]
        sig, lam = _random_codiag_pair(d, 0.5, 2.0, r, rotate=True)
        subs.append(diag.check_pl_inequality(sig, lam, 0.5, 2.0, 4096 if quick else 10000, r))
    reports.append(_aggregate("pl_inequality_campaign", subs, "spectra [0.5,2] d in {2,5,10}"))

    # gradient-variance decomposition
    r = rng.child(3)
    subs = []
    for i in range(3 if quick else 10):
        d = (2, 3, 5)[i % 3]
        sig, _ = _random_codiag_pair(d, 0.5, 4.0, r, rotate=True)
        lam, _ = _random_codiag_pair(d, 0.5, 4.0, r, rotate=True)
        subs.append(
            diag.check_decomposition(sig, lam, 4000 if quick else 20000, 20000 if quick else 100000, r)
        )
    reports.append(_aggregate("gradient_variance_campaign", subs))

    # sphere quartic moment identity
    r = rng.child(4)
    subs = []
    for i in range(10 if quick else 50):
        d = int(r.gen.integers(2, 11))
        g = r.gen.standard_normal((d, d))
        subs.append(diag.sphere_quartic_moment_check(0.5 * (g + g.T), 10**5 if quick else 10**6, r))
    reports.append(_aggregate("sphere_quartic_campaign", subs, "d<=10"))

    # spectral recursion + isotropic stability along basis-mode flows
    d, K = 5, (200 if quick else 2000)
    sched = StepSchedule(alpha=0.51)
    r = rng.child(5)
    rec_subs = []
    worst_lmin, worst_tr = -np.inf, -np.inf
    for s in range(2 if quick else 10):
        flow_rng = r.child(s)
        sigma0 = init_source_covariance(d, r.child(100 + s))
        rec_subs.append(diag.check_eigen_recursion(sigma0, np.eye(d), sched, K, flow_rng))
        records = run_gaussian_flow(
            sigma0, np.eye(d), sched, K, SamplingMode.BASIS, flow_rng, L_sw=64, eval_every=1
        )
        worst_lmin = max(worst_lmin, max(rec.lambda_min for rec in records if rec.k >= 1))
        worst_tr = max(worst_tr, max(rec.m2 for rec in records if rec.k >= 1))
    reports.append(_aggregate("eigen_recursion", rec_subs, f"d={d} K={K}"))
    reports.append(
        diag.CheckReport("isotropic_lambda_min_bound", worst_lmin <= 1.0 + 1e-9,
                         worst_lmin, 1.0, 1e-9, f"max over k>=1, d={d} K={K}")
    )
    reports.append(
        diag.CheckReport("isotropic_trace_bound", worst_tr <= d + 1e-9,
                         worst_tr, float(d), 1e-9, f"max over k>=1, d={d} K={K}")
    )

    # particle-side moment bound
    r = rng.child(6)
    src = init_gaussian_mixture_cloud(3, 200, r.child(0))
    tgt = init_gaussian_mixture_cloud(3, 200, r.child(1))
    records, _ = run_scheme(src, tgt, StepSchedule(alpha=0.1), 200, SamplingMode.BASIS,
                            r.child(2), eval_every=1, L_sw=32)
    m2_tgt = second_moment(tgt)
    worst = max(rec.m2 for rec in records if rec.k >= 1)
    reports.append(
        diag.CheckReport("particle_moment_bound", worst <= m2_tgt + 1e-9,
                         worst, m2_tgt, 1e-9, "mixture pair d=3 n=200 K=200")
    )

    # weighted-gradient descent bound, two schedules
    d, K = 5, (300 if quick else 2000)
    n_runs = 4 if quick else 10
    for alpha in (0.9, 0.51):
        sched = StepSchedule(alpha=alpha)
        r = rng.child(7).child(int(alpha * 100))
        runs, f0s = [], []
        for s in range(n_runs):
            sigma0 = init_source_covariance(d, r.child(100 + s))
            recs = run_gaussian_flow(sigma0, np.eye(d), sched, K, SamplingMode.BASIS,
                                     r.child(s), L_sw=2, eval_every=1, grad_dirs=128)
            runs.append(recs)
            f0s.append(0.5 * d * sw2sq_gaussian_mc(sigma0, np.eye(d), 4096, r.child(200 + s)).value)
        rep = diag.check_weighted_gradient_bound(runs, sched, float(d), float(np.mean(f0s)))
        reports.append(replace(rep, name=f"weighted_gradient_alpha{alpha:g}"))

    # informational: sufficient-condition accumulator under a non-isotropic target
    d, K = 5, (100 if quick else 1000)
    r = rng.child(8)
    lam = _general_target_diag(d, r.child(0))
    sigma0 = init_source_covariance(d, r.child(1))
    sched = StepSchedule(alpha=0.51)
    _, sigmas = run_gaussian_flow(sigma0, lam, sched, K, SamplingMode.BASIS, r.child(2),
                                  L_sw=2, eval_every=K, return_sigmas=True)
    partial = diag.sufficient_condition_accumulator(sigmas[:-1], lam, sched, 2, 256, r.child(3))
    notes.append(
        f"sufficient-condition accumulator (p=2, non-isotropic target, d={d}, K={K}): "
        f"final partial sum {partial[-1]:.6g}, max {partial.max():.6g} (informational, no verdict)"
    )
    return reports, notes
