"""Numerical workbench for the two BSDEs of stochastic optimal control.

The value-function and co-state backward equations are solved by
least-squares Monte-Carlo and by time-reversal of the state diffusion, and
benchmarked against the exact Riccati solution in the linear-quadratic
setting.
"""

from .approx import LinearFn, QuadraticFn, fit_linear, fit_quadratic
from .errors import (
    BsdeLabError,
    DimensionMismatchError,
    NonFiniteError,
    NonPDError,
    NonPSDError,
    SingularCovarianceError,
    SingularSigmaError,
    TooFewSamplesError,
)
from .lq import (
    LQProblem,
    TimeGrid,
    builtin_2d,
    control_affine_parts,
    load_problem,
    make_lq,
    mass_spring,
    problem_from_dict,
    problem_to_dict,
    running_cost,
    save_problem,
    terminal_cost,
    uniform_grid,
)
from .lsmc import ApproxSolution, DriverKind, driver_costate, driver_value, lsmc_solve
from .policy import (
    METHODS,
    IterationHistory,
    extract_gain,
    history_to_csv,
    mse_vs_oracle,
    run_policy_iteration,
)
from .riccati import (
    RiccatiSolution,
    exact_costate,
    exact_value,
    optimal_expected_cost,
    optimal_gain,
    optimal_gains,
    riccati_to_csv,
    solve_riccati,
)
from .score import (
    AffineScore,
    auto_jitter,
    eval_score,
    fit_affine_score,
    make_affine_score,
    score_matching_objective,
)
from .simulate import (
    ControlLaw,
    TrajectoryBatch,
    batch_to_csv,
    brownian_increments,
    cost_samples,
    derive_seed,
    estimate_cost,
    simulate_forward,
)
from .timereversal import ReversedBatch, correction_c, fit_scores, reverse_step, tr_solve

__version__ = "0.1.0"
