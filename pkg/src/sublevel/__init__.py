"""Numerical verification of infimum identities over sub-level sets of integral functionals."""

from .errors import (
    AlphaBetaUndetermined,
    CoercivityError,
    ConfigError,
    ConsistencyError,
    ConstructionError,
    EvaluationError,
    InfeasibleError,
    LevelJumpError,
    LevelSetNotFound,
    NoPositiveSolution,
    OutOfRangeError,
    SublevelError,
)
from .extended import NEG_INF, POS_INF, ExtendedReal
from .functionals import FAMILIES, AlphaBeta, FunctionalPair, alpha_beta, make_instance
from .inequalities import JensenInstance, jensen_check, naive_jensen_comparison, validate_jensen_hypotheses
from .measure import StepFunction, Tolerances, VerificationReport, WeightedMeasureSpace, verify_identity
from .pde1d import (
    IntervalProblem,
    check_energy_condition,
    principal_eigenvalue,
    solve_positive,
    verify_cubic_energy_bound,
    verify_sup_identity,
)
from .scalarize import SearchConfig, find_lambda_r, level_set_infimum, minimize_penalized
from .suite import explain, load_config, run_suite

__version__ = "0.1.0"
