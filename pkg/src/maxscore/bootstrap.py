"""Product-multiplier bootstrap for multiway-clustered score estimation.

Each clustering dimension gets i.i.d. mean-one variance-one multipliers; a
cell's weight is the product of its dimensions' multipliers. Re-optimizing
the weighted objective B times yields draws whose conditional law mimics the
sampling law of the estimator, from which percentile and symmetric intervals
are read off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import Dataset, MultiIndexGrid
from .score import ConstraintSet, SweepPlan, argmax_enumerate, argmax_sweep_2d

__all__ = [
    "WeightSpec",
    "BootstrapReport",
    "draw_weights",
    "bootstrap_estimate",
    "confidence_intervals",
]

_DISTRIBUTIONS = ("exponential1", "poisson1")


@dataclass(frozen=True)
class WeightSpec:
    """Multiplier distribution (mean 1, variance 1) and replication count."""

    distribution: str = "exponential1"
    B: int = 200

    def __post_init__(self):
        if self.distribution not in _DISTRIBUTIONS:
            raise ValueError(
                f"unknown distribution {self.distribution!r}; expected one of {_DISTRIBUTIONS}"
            )
        if self.B < 1:
            raise ValueError("B must be >= 1")


@dataclass
class BootstrapReport:
    """All replicate draws plus the derived variance and intervals.

    ``theta_star`` is B x (d-1) in the chart around the reference direction;
    ``variance_hat`` is the sample covariance of sqrt(n)(theta*-theta_hat);
    ``intervals[level]`` holds per-coordinate "percentile" and "symmetric"
    (lo, hi) pairs.
    """

    theta_hat: np.ndarray
    beta_hat: np.ndarray
    theta_star: np.ndarray
    beta_star: np.ndarray
    variance_hat: np.ndarray
    intervals: dict
    spec: WeightSpec
    seed: int
    n: int
    reference: np.ndarray = field(default=None)

    def __post_init__(self):
        eig = np.linalg.eigvalsh(np.atleast_2d(self.variance_hat))
        if np.any(eig < -1e-10):
            raise ValueError("variance_hat must be positive semi-definite")


def _dimension_draws(spec: WeightSpec, size: int, seed: int, rep: int, k: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, rep, k)))
    if spec.distribution == "exponential1":
        return rng.exponential(1.0, size)
    return rng.poisson(1.0, size).astype(np.float64)


def draw_weights(spec: WeightSpec, grid: MultiIndexGrid, seed: int, rep: int) -> np.ndarray:
    """Per-cell product weights in lexicographic cell order.

    Multipliers are keyed by (seed, replicate, dimension) so draws depend
    only on indices, never on data values, and are scheduling-independent.
    """
    per_dim = [
        _dimension_draws(spec, size, seed, rep, k)
        for k, size in enumerate(grid.sizes, start=1)
    ]
    cells = grid.cell_array()
    return _record_weights(per_dim, cells)


def _record_weights(per_dim, indices: np.ndarray) -> np.ndarray:
    w = np.ones(indices.shape[0])
    for k, draws in enumerate(per_dim):
        w *= draws[indices[:, k] - 1]
    return w


def bootstrap_estimate(
    data: Dataset,
    spec: WeightSpec,
    optimizer: str = "sweep",
    constraint: ConstraintSet = ConstraintSet(),
    seed: int = 0,
    reference: np.ndarray | None = None,
    levels=(0.9, 0.95),
    weight_fn=None,
) -> BootstrapReport:
    """Full bootstrap run: B weighted re-optimizations plus interval assembly.

    ``reference`` fixes the hemisphere and chart for theta extraction; it
    defaults to the point estimate itself. ``weight_fn(rep) -> weights`` is a
    test hook replacing the multiplier draws.
    """
    if data.n_records == 0:
        raise ValueError("empty dataset")
    if optimizer not in ("sweep", "enumerate"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    use_sweep = optimizer == "sweep"
    if use_sweep and data.d != 2:
        raise ValueError("sweep optimizer requires d = 2")

    plan = SweepPlan(data.x) if use_sweep else None

    def solve(weights):
        if use_sweep:
            return argmax_sweep_2d(data, constraint, weights, plan=plan)
        return argmax_enumerate(data, constraint, weights)

    point = solve(None)
    if reference is None:
        reference = point.beta_hat
    reference = np.asarray(reference, dtype=np.float64)
    from .score import _attach_theta

    _attach_theta(point, reference)

    theta_star = np.empty((spec.B, data.d - 1))
    beta_star = np.empty((spec.B, data.d))
    for rep in range(1, spec.B + 1):
        if weight_fn is not None:
            w = np.asarray(weight_fn(rep), dtype=np.float64)
        else:
            per_dim = [
                _dimension_draws(spec, size, seed, rep, k)
                for k, size in enumerate(data.grid.sizes, start=1)
            ]
            w = _record_weights(per_dim, data.indices)
        try:
            est = solve(w)
        except Exception as exc:
            raise RuntimeError(f"bootstrap replicate {rep} failed") from exc
        _attach_theta(est, reference)
        theta_star[rep - 1] = est.theta_hat
        beta_star[rep - 1] = est.beta_hat

    n = data.grid.n
    root_dev = np.sqrt(n) * (theta_star - point.theta_hat)
    if spec.B > 1:
        variance_hat = np.atleast_2d(np.cov(root_dev, rowvar=False))
    else:
        variance_hat = np.zeros((data.d - 1, data.d - 1))
    intervals = (
        confidence_intervals(point.theta_hat, theta_star, levels)
        if spec.B >= 20
        else {}
    )
    return BootstrapReport(
        theta_hat=point.theta_hat,
        beta_hat=point.beta_hat,
        theta_star=theta_star,
        beta_star=beta_star,
        variance_hat=variance_hat,
        intervals=intervals,
        spec=spec,
        seed=seed,
        n=n,
        reference=reference,
    )


def _quantile_type1(sorted_draws: np.ndarray, p: float) -> float:
    """Left-continuous inverse of the empirical cdf."""
    b = sorted_draws.shape[0]
    idx = max(math.ceil(p * b), 1) - 1
    return float(sorted_draws[min(idx, b - 1)])


def confidence_intervals(theta_hat, theta_star, levels=(0.9, 0.95)) -> dict:
    """Percentile and symmetric intervals per coordinate at each level.

    Percentile: [theta_hat - q_{1-a/2}(D), theta_hat - q_{a/2}(D)] with
    D = theta* - theta_hat; symmetric: theta_hat +- q_{1-a}(|D|).
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=np.float64))
    theta_star = np.atleast_2d(np.asarray(theta_star, dtype=np.float64))
    if theta_star.shape[0] < 20:
        raise ValueError("need at least 20 bootstrap draws for intervals")
    if theta_star.shape[1] != theta_hat.shape[0]:
        raise ValueError("draw dimension mismatch")
    out = {}
    for level in levels:
        if not 0.0 < level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {level}")
        alpha = 1.0 - level
        per_coord = []
        for j in range(theta_hat.shape[0]):
            dev = np.sort(theta_star[:, j] - theta_hat[j])
            lo = theta_hat[j] - _quantile_type1(dev, 1.0 - alpha / 2.0)
            hi = theta_hat[j] - _quantile_type1(dev, alpha / 2.0)
            half = _quantile_type1(np.sort(np.abs(dev)), level)
            per_coord.append(
                {
                    "percentile": (lo, hi),
                    "symmetric": (theta_hat[j] - half, theta_hat[j] + half),
                }
            )
        out[level] = per_coord
    return out
