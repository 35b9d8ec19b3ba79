"""Federated zero-order optimization with l1-sphere randomization.

A simulator for distributed two-point gradient-free optimization with
sign-compressed worker messages, together with a verification lab for the
explicit-constant tail bounds and the time-uniform sub-gamma martingale
boundary that certify the method's high-probability behavior.
"""

from ._accel import NUMBA_ENABLED
from .boundary import (
    MartingaleSpec,
    SubGammaBoundary,
    boundary_coverage_experiment,
    subgamma_boundary,
)
from .engine import (
    RunConfig,
    RunTrace,
    default_hyperparams,
    deviation_and_variance_budgets,
    measure_deviation,
    run_direct,
    run_federated,
    theoretical_regret_bound,
)
from .estimator import (
    SmoothedOracle,
    WorkerMessage,
    decode_message,
    encode_message,
    grad_estimate,
    smoothed_grad_mc,
    smoothed_value_mc,
    two_point_queries,
)
from .geometry import (
    FeasibleSet,
    project,
    sample_l1_ball,
    sample_l1_sphere,
    sample_laplace,
    sign_vec,
)
from .objectives import (
    Problem,
    eval_context,
    make_problem,
    minimizer,
    population_value,
)
from .streams import RngStream
from .tails import TailReport, empirical_tail, envelope, moment_check, tail_experiment

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "RngStream",
    "FeasibleSet",
    "project",
    "sample_laplace",
    "sample_l1_sphere",
    "sample_l1_ball",
    "sign_vec",
    "Problem",
    "make_problem",
    "eval_context",
    "population_value",
    "minimizer",
    "WorkerMessage",
    "SmoothedOracle",
    "two_point_queries",
    "grad_estimate",
    "encode_message",
    "decode_message",
    "smoothed_value_mc",
    "smoothed_grad_mc",
    "RunConfig",
    "RunTrace",
    "run_federated",
    "run_direct",
    "default_hyperparams",
    "theoretical_regret_bound",
    "deviation_and_variance_budgets",
    "measure_deviation",
    "envelope",
    "empirical_tail",
    "tail_experiment",
    "TailReport",
    "moment_check",
    "SubGammaBoundary",
    "MartingaleSpec",
    "subgamma_boundary",
    "boundary_coverage_experiment",
]
