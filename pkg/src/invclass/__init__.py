"""Exact and fast inverse classification for linear softmax models.

Given a trained linear classifier, a source instance, and a target class,
these solvers find the closest input the classifier assigns to the target
class, trading proximity against target-class confidence through a single
regularization weight.
"""

from .baselines import BaselineConfig, solve_baseline
from .bench import (
    BenchRecord,
    BenchReport,
    SuiteSpec,
    format_comparison_table,
    generate_problem_suite,
    generate_synthetic_model,
    run_benchmark,
)
from .errors import (
    InfeasibleTargetError,
    InverseClassificationError,
    LineSearchError,
    ModelFormatError,
    NumericalBreakdownError,
    PathSolveError,
)
from .linesearch import backtracking_search, wolfe_search
from .logistic import sigmoid_fixed_point, solve_closed_form, solve_logistic
from .model import (
    LogisticModel,
    ReducedModel,
    SoftmaxModel,
    format_vector,
    load_instance,
    load_model,
    reduce,
    save_instance,
    save_model,
    softmax_eval,
    to_logistic,
)
from .newton import (
    IterRecord,
    SolverConfig,
    SolverResult,
    newton_direction,
    solve_newton,
    write_trace_csv,
)
from .objective import (
    Problem,
    eval_objective,
    gradient,
    hessian_matvec,
    lipschitz_bound,
    target_neg_log_prob,
)
from .path import (
    PathConfig,
    PathEntry,
    PathResult,
    constrained_solve,
    solve_path,
    write_path_csv,
    write_path_solutions,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "BenchRecord",
    "BenchReport",
    "IterRecord",
    "InfeasibleTargetError",
    "InverseClassificationError",
    "LineSearchError",
    "LogisticModel",
    "ModelFormatError",
    "NumericalBreakdownError",
    "PathConfig",
    "PathEntry",
    "PathResult",
    "PathSolveError",
    "Problem",
    "ReducedModel",
    "SoftmaxModel",
    "SolverConfig",
    "SolverResult",
    "SuiteSpec",
    "backtracking_search",
    "constrained_solve",
    "eval_objective",
    "format_comparison_table",
    "format_vector",
    "generate_problem_suite",
    "generate_synthetic_model",
    "gradient",
    "hessian_matvec",
    "lipschitz_bound",
    "load_instance",
    "load_model",
    "newton_direction",
    "reduce",
    "run_benchmark",
    "save_instance",
    "save_model",
    "sigmoid_fixed_point",
    "softmax_eval",
    "solve_baseline",
    "solve_closed_form",
    "solve_logistic",
    "solve_newton",
    "solve_path",
    "target_neg_log_prob",
    "to_logistic",
    "wolfe_search",
    "write_path_csv",
    "write_path_solutions",
    "write_trace_csv",
]
