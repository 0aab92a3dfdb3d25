"""Monte Carlo studies of the estimator's sampling behavior.

Three desk-scale experiments: a convergence-rate regression across grid
sizes, a normality check of the scaled estimate at one size, and a coverage
study of the multiplier-bootstrap intervals. Replications use keyed
per-replicate seeds and index-ordered reduction, so reports are bit-identical
regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .arrays import MultiIndexGrid, materialize
from .bootstrap import WeightSpec, bootstrap_estimate
from .dgp import DgpSpec
from .score import ConstraintSet, argmax_sweep_2d

__all__ = [
    "ExperimentConfig",
    "RateReport",
    "NormalityReport",
    "CoverageReport",
    "run_rate_study",
    "run_normality_study",
    "run_coverage_study",
]

_LAYOUTS = ("square", "row")


@dataclass(frozen=True)
class ExperimentConfig:
    """One study's design: DGP, grid schedule, replication budget, seeds.

    ``layout`` chooses the grid shape per scheduled size n: "square" gives
    (n, n) so both cluster dimensions grow together, "row" gives (n, 1) so
    the record count equals n.
    """

    variant: str
    sizes: tuple
    reps: int
    seed: int = 0
    layout: str = "square"
    bootstrap: WeightSpec | None = None
    levels: tuple = (0.9,)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "levels", tuple(float(l) for l in self.levels))
        if self.reps < 50:
            raise ValueError("need at least 50 replications")
        if any(n < 2 for n in self.sizes):
            raise ValueError("grid sizes must be >= 2")
        if self.layout not in _LAYOUTS:
            raise ValueError(f"layout must be one of {_LAYOUTS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid(self, n: int) -> MultiIndexGrid:
        return MultiIndexGrid((n, n) if self.layout == "square" else (n, 1))


@dataclass
class RateReport:
    sizes: tuple
    rmse_theta: np.ndarray
    rmse_angle: np.ndarray
    reps_done: tuple
    slope: float
    slope_se: float
    config: ExperimentConfig

    def __post_init__(self):
        if np.any(self.rmse_theta < 0) or self.slope_se <= 0:
            raise ValueError("invalid rate report")


@dataclass
class NormalityReport:
    n: int
    draws: np.ndarray
    sd: float
    ks_stat: float
    p_value: float
    qq: np.ndarray
    degenerate: bool
    reps_done: int
    config: ExperimentConfig


@dataclass
class CoverageReport:
    levels: tuple
    coverage: dict
    coverage_se: dict
    avg_length: dict
    ks_distance: float
    reps_done: int
    config: ExperimentConfig

    def __post_init__(self):
        for level, c in self.coverage.items():
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"coverage at level {level} outside [0, 1]")


def _rep_seed(seed: int, n: int, rep: int, salt: int = 0) -> int:
    from .arrays import _combine

    h = _combine(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), n)
    h = _combine(h, rep)
    return int(_combine(h, salt))


def _estimate_rep(args):
    """One replication: simulate, estimate, return (theta, angle error)."""
    variant, layout, n, rep_seed = args
    spec = DgpSpec(variant=variant)
    grid = MultiIndexGrid((n, n) if layout == "square" else (n, 1))
    data = materialize(spec, grid, rep_seed)
    est = argmax_sweep_2d(data, ConstraintSet(), reference=spec.beta0)
    cosang = min(abs(float(est.beta_hat @ spec.beta0)), 1.0)
    return float(est.theta_hat[0]), float(np.arccos(cosang))


def _coverage_rep(args):
    variant, layout, n, rep_seed, wspec, levels = args
    spec = DgpSpec(variant=variant)
    grid = MultiIndexGrid((n, n) if layout == "square" else (n, 1))
    data = materialize(spec, grid, rep_seed)
    report = bootstrap_estimate(
        data, wspec, seed=_rep_seed(rep_seed, n, 0, salt=0xB00), reference=spec.beta0,
        levels=levels,
    )
    covered, lengths = {}, {}
    for level in levels:
        lo, hi = report.intervals[level][0]["percentile"]
        covered[level] = bool(lo <= 0.0 <= hi)
        lengths[level] = float(hi - lo)
    root_dev = np.sqrt(grid.n) * (report.theta_star[:, 0] - report.theta_hat[0])
    return float(report.theta_hat[0]), covered, lengths, root_dev


def _run_jobs(fn, jobs, workers: int):
    """Evaluate jobs, collecting results and failures in job order."""
    results = [None] * len(jobs)
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, outcome in enumerate(pool.map(_guard(fn), jobs, chunksize=8)):
                ok, payload = outcome
                if ok:
                    results[idx] = payload
                else:
                    failures.append((idx, payload))
    else:
        for idx, job in enumerate(jobs):
            try:
                results[idx] = fn(job)
            except Exception as exc:
                failures.append((idx, repr(exc)))
    if len(failures) > 0.01 * len(jobs):
        raise RuntimeError(f"{len(failures)}/{len(jobs)} replications failed: {failures[:5]}")
    return [r for r in results if r is not None], failures


class _guard:
    """Picklable wrapper turning worker exceptions into tagged results."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, job):
        try:
            return True, self.fn(job)
        except Exception as exc:
            return False, repr(exc)


def run_rate_study(config: ExperimentConfig) -> RateReport:
    """RMSE of the chart coordinate per grid size, with a log-log slope."""
    if len(config.sizes) < 3:
        raise ValueError("rate regression needs at least 3 grid sizes")
    rmse_t, rmse_a, done = [], [], []
    for n in config.sizes:
        jobs = [
            (config.variant, config.layout, n, _rep_seed(config.seed, n, rep))
            for rep in range(1, config.reps + 1)
        ]
        results, _ = _run_jobs(_estimate_rep, jobs, config.workers)
        thetas = np.array([r[0] for r in results])
        angles = np.array([r[1] for r in results])
        rmse_t.append(float(np.sqrt(np.mean(thetas**2))))
        rmse_a.append(float(np.sqrt(np.mean(angles**2))))
        done.append(len(results))
    logn = np.log(np.asarray(config.sizes, dtype=np.float64))
    logr = np.log(np.asarray(rmse_t))
    slope, intercept = np.polyfit(logn, logr, 1)
    resid = logr - (slope * logn + intercept)
    dof = len(logn) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else float("nan")
    slope_se = float(np.sqrt(s2 / np.sum((logn - logn.mean()) ** 2)))
    return RateReport(
        sizes=config.sizes,
        rmse_theta=np.asarray(rmse_t),
        rmse_angle=np.asarray(rmse_a),
        reps_done=tuple(done),
        slope=float(slope),
        slope_se=slope_se,
        config=config,
    )


def run_normality_study(config: ExperimentConfig) -> NormalityReport:
    """KS test of sqrt(n) theta_hat, standardized by its own sample SD."""
    if len(config.sizes) != 1:
        raise ValueError("normality study uses a single grid size")
    if config.reps < 300:
        raise ValueError("normality study needs at least 300 replications")
    n = config.sizes[0]
    jobs = [
        (config.variant, config.layout, n, _rep_seed(config.seed, n, rep))
        for rep in range(1, config.reps + 1)
    ]
    results, _ = _run_jobs(_estimate_rep, jobs, config.workers)
    draws = np.sqrt(n) * np.array([r[0] for r in results])
    sd = float(np.std(draws, ddof=1))
    degenerate = sd < 1e-12
    if degenerate:
        ks_stat, p_value = float("nan"), float("nan")
        std = np.zeros_like(draws)
    else:
        std = draws / sd
        ks_stat, p_value = stats.kstest(std, "norm")
    probs = (np.arange(1, len(draws) + 1) - 0.5) / len(draws)
    qq = np.column_stack([stats.norm.ppf(probs), np.sort(std)])
    return NormalityReport(
        n=n, draws=draws, sd=sd, ks_stat=float(ks_stat), p_value=float(p_value),
        qq=qq, degenerate=degenerate, reps_done=len(results), config=config,
    )


def run_coverage_study(config: ExperimentConfig) -> CoverageReport:
    """Empirical CI coverage of theta0 = 0 plus a bootstrap-law comparison."""
    if config.bootstrap is None:
        raise ValueError("coverage study needs a bootstrap weight spec")
    if config.reps < 200:
        raise ValueError("coverage study needs at least 200 replications")
    if len(config.sizes) != 1:
        raise ValueError("coverage study uses a single grid size")
    n = config.sizes[0]
    jobs = [
        (config.variant, config.layout, n, _rep_seed(config.seed, n, rep),
         config.bootstrap, config.levels)
        for rep in range(1, config.reps + 1)
    ]
    results, _ = _run_jobs(_coverage_rep, jobs, config.workers)
    grid_n = config.grid(n).n
    mc_draws = np.sqrt(grid_n) * np.array([r[0] for r in results])
    coverage, coverage_se, avg_length = {}, {}, {}
    for level in config.levels:
        hits = np.array([r[1][level] for r in results], dtype=np.float64)
        coverage[level] = float(np.mean(hits))
        coverage_se[level] = float(np.sqrt(coverage[level] * (1 - coverage[level]) / len(hits)))
        avg_length[level] = float(np.mean([r[2][level] for r in results]))
    pooled = np.concatenate([r[3] for r in results])
    ks_distance = float(stats.ks_2samp(mc_draws, pooled).statistic)
    return CoverageReport(
        levels=config.levels, coverage=coverage, coverage_se=coverage_se,
        avg_length=avg_length, ks_distance=ks_distance, reps_done=len(results),
        config=config,
    )
