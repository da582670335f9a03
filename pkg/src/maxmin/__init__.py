"""maxmin: ball-oracle accelerated minimization of the maximum of convex
functions over a Euclidean ball or truncated simplex."""

from .accelerator import AccelParams, SolverReport, accelerate, stopping_threshold
from .apps import solve_matrix_game, solve_meb, solve_smooth_max, subgradient_baseline
from .ball_oracle import (
    BallOracleResult,
    OracleConfig,
    OracleProfile,
    lambda_bisection,
    li_md,
    practical_profile,
    restricted_oracle,
    theory_profile,
)
from .estimator import SoftmaxGradientEstimator, estimator_init
from .geometry import (
    GeometrySetup,
    Kind,
    ball_setup,
    bregman,
    domain_radius_bound,
    mirror_average,
    prox_step,
    simplex_setup,
    tau,
)
from .maintenance import MatVecMaintainer, mvm_init
from .problems import (
    LinearMaxProblem,
    MatrixGameInstance,
    MaxProblem,
    MebInstance,
    QuadraticMaxProblem,
)
from .sketches import CountSketchMve, ExactMve, SampleMve, mve_init

__version__ = "0.1.0"
