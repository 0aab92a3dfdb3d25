"""Maximum score estimation for binary choice with multiway-clustered data.

Exact d = 2 optimization by angular sweep, subset enumeration up to d = 4,
simulation designs on two-way grids with keyed latent shocks, latent-pattern
decomposition diagnostics, an asymptotic-variance oracle, a product
multiplier bootstrap, and a Monte Carlo study harness.
"""

from .arrays import Dataset, LatentStore, MultiIndexGrid, PatternKey, latent, materialize
from .bootstrap import (
    BootstrapReport,
    WeightSpec,
    bootstrap_estimate,
    confidence_intervals,
    draw_weights,
)
from .dgp import VARIANTS, DgpSpec, Observation, evaluate_tau
from .estimator import MaximumScoreEstimator
from .geometry import (
    ComplementBasis,
    Direction,
    basis_complement,
    beta_of_theta,
    reflect_to_hemisphere,
    theta_of_beta,
)
from .hoeffding import ProjectionTable, decompose, project_exact, project_mc
from .mc_harness import (
    CoverageReport,
    ExperimentConfig,
    NormalityReport,
    RateReport,
    run_coverage_study,
    run_normality_study,
    run_rate_study,
)
from .oracle import (
    AsymptoticOracle,
    QuadratureSpec,
    oracle_delta,
    oracle_hessian,
    oracle_variance,
)
from .score import (
    ConstraintSet,
    DirectionEstimate,
    SweepPlan,
    argmax_enumerate,
    argmax_sweep_2d,
    objective,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LatentStore", "MultiIndexGrid", "PatternKey", "latent", "materialize",
    "DgpSpec", "Observation", "VARIANTS", "evaluate_tau",
    "Direction", "ComplementBasis", "basis_complement", "beta_of_theta",
    "theta_of_beta", "reflect_to_hemisphere",
    "ConstraintSet", "DirectionEstimate", "SweepPlan", "objective",
    "argmax_sweep_2d", "argmax_enumerate",
    "MaximumScoreEstimator",
    "ProjectionTable", "project_exact", "project_mc", "decompose",
    "AsymptoticOracle", "QuadratureSpec", "oracle_delta", "oracle_hessian",
    "oracle_variance",
    "WeightSpec", "BootstrapReport", "draw_weights", "bootstrap_estimate",
    "confidence_intervals",
    "ExperimentConfig", "RateReport", "NormalityReport", "CoverageReport",
    "run_rate_study", "run_normality_study", "run_coverage_study",
    "__version__",
]
