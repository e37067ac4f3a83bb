"""Newton's method with the K x K reduced direction solve.

The Hessian of E is lam * I plus a rank-(K-1) softmax curvature term, so the
Newton system never needs a D x D factorization: writing v = a_bar.T @ p and
H = lam * I + a_bar.T @ diag(p) @ a_bar, the full Hessian is H - v v.T, and

    H^{-1} u = (u - a_bar.T @ S M^{-1} S @ a_bar @ u) / lam,
    M = S @ gram @ S + lam * I,   S = diag(sqrt(p)),

with the rank-one term folded back in by a Sherman-Morrison correction with
denominator 1 - v.T H^{-1} v. M is symmetric positive definite for every
probability vector, including entries that underflow to exactly 0, and is
solved by a Cholesky factorization. Each direction costs O(K^3 + K D).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import LineSearchError, NumericalBreakdownError
from .linesearch import (
    backtracking_search,
    decrease_below_resolution,
    stalled_step_acceptable,
    wolfe_search,
)
from .model import ReducedModel, SoftmaxModel
from .objective import Problem, eval_objective, gradient, lipschitz_bound

_LINE_SEARCHES = ("backtracking", "wolfe", "constant")

# Below this, 1 - v.T H^{-1} v is rounding noise (it is positive in exact
# arithmetic); the solver falls back to one gradient step instead.
_DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    """Iteration and line-search settings shared by all solvers."""

    grad_tol: float = 1e-8
    max_iter: int = 1000
    backtrack_factor: float = 0.8
    max_backtracks: int = 100
    line_search: str = "backtracking"

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.line_search not in _LINE_SEARCHES:
            raise ValueError("line_search must be one of %s" % (_LINE_SEARCHES,))


@dataclass(frozen=True)
class IterRecord:
    """One accepted iteration (iteration 0 records the starting point)."""

    iteration: int
    objective: float
    grad_norm: float
    step_size: float
    backtrack_count: int
    elapsed_seconds: float


@dataclass(frozen=True)
class SolverResult:
    x_star: np.ndarray
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: tuple = field(repr=False)


def newton_direction(
    reduced: ReducedModel,
    prob: Problem,
    x: np.ndarray,
    p: np.ndarray,
    grad: np.ndarray,
) -> np.ndarray:
    """Exact Newton direction -(Hessian)^{-1} grad at ``x``.

    ``p`` and ``grad`` must be evaluated at ``x``. Solves one K x K symmetric
    positive-definite system (two right-hand sides) instead of anything
    D-dimensional; never forms an explicit inverse.

    Raises
    ------
    NumericalBreakdownError
        If the Cholesky factorization fails or the Sherman-Morrison
        denominator 1 - v.T H^{-1} v falls to rounding level (<= 1e-14).
    """
    lam = prob.lam
    a_bar = reduced.a_bar
    sqrt_p = np.sqrt(p)
    kxk = reduced.gram * (sqrt_p[:, None] * sqrt_p[None, :])
    kxk[np.diag_indices_from(kxk)] += lam
    try:
        factor = cho_factor(kxk, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise NumericalBreakdownError("K x K Newton system factorization failed") from exc

    v = a_bar.T @ p
    rhs = np.column_stack((v, grad))
    y = sqrt_p[:, None] * (a_bar @ rhs)
    w = cho_solve(factor, y, check_finite=False)
    solved = (rhs - a_bar.T @ (sqrt_p[:, None] * w)) / lam  # H^{-1} [v, grad]
    h_inv_v = solved[:, 0]
    h_inv_g = solved[:, 1]
    denominator = 1.0 - float(v @ h_inv_v)
    if denominator <= _DENOM_FLOOR:
        raise NumericalBreakdownError(
            "Sherman-Morrison denominator %.3e is at rounding level" % denominator
        )
    return -(h_inv_g + h_inv_v * (float(v @ h_inv_g) / denominator))


def solve_newton(
    reduced: ReducedModel,
    model: SoftmaxModel,
    prob: Problem,
    x0: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
) -> SolverResult:
    """Minimize E from ``x0`` (default: the source instance).

    Iterates x <- x + alpha * d with the reduced Newton direction and the
    configured line search until ||grad E|| < grad_tol or max_iter. The trace
    starts with the initial point and records every accepted step. If the
    direction computation breaks down numerically the iteration takes one
    gradient step of length 1/L instead and continues.
    """
    cfg = cfg or SolverConfig()
    x = np.array(prob.source if x0 is None else x0, dtype=np.float64, copy=True)
    start = time.perf_counter()

    def eval_e(y):
        return eval_objective(reduced, model, prob, y)[0]

    energy, p = eval_objective(reduced, model, prob, x)
    grad = gradient(reduced, prob, x, p)
    grad_norm = float(np.linalg.norm(grad))
    trace = [IterRecord(0, energy, grad_norm, 0.0, 0, time.perf_counter() - start)]

    lipschitz = None
    iterations = 0
    while grad_norm >= cfg.grad_tol and iterations < cfg.max_iter:
        forced_step = None
        try:
            d = newton_direction(reduced, prob, x, p, grad)
        except NumericalBreakdownError:
            if lipschitz is None:
                lipschitz = lipschitz_bound(reduced, prob)
            d = -grad
            forced_step = 1.0 / lipschitz

        if forced_step is not None:
            alpha, trials = forced_step, 0
            x_new = x + alpha * d
            e_new = eval_e(x_new)
            if not e_new < energy:
                raise LineSearchError("fallback gradient step produced no decrease")
        elif cfg.line_search == "constant":
            if lipschitz is None:
                lipschitz = lipschitz_bound(reduced, prob)
            alpha, trials = 1.0 / lipschitz, 0
            x_new = x + alpha * d
        else:
            x_new = None
            if not decrease_below_resolution(energy, float(grad @ d)):
                try:
                    if cfg.line_search == "backtracking":
                        alpha, e_new, trials = backtracking_search(
                            eval_e, x, d, energy, cfg.backtrack_factor,
                            cfg.max_backtracks,
                        )
                    else:  # wolfe
                        def eval_g(y):
                            _, p_y = eval_objective(reduced, model, prob, y)
                            return gradient(reduced, prob, y, p_y)

                        alpha, e_new, _ = wolfe_search(
                            eval_e, eval_g, x, d, 1.0, f0=energy, g0=grad
                        )
                        trials = 0
                    x_new = x + alpha * d
                except LineSearchError:
                    pass  # probe the unit step below
            if x_new is None:
                # objective differences fell below float resolution; the unit
                # step must earn acceptance by shrinking the gradient instead
                x_cand = x + d
                e_cand, p_cand = eval_objective(reduced, model, prob, x_cand)
                g_cand = gradient(reduced, prob, x_cand, p_cand)
                if not stalled_step_acceptable(
                    energy, grad_norm, e_cand, float(np.linalg.norm(g_cand))
                ):
                    raise LineSearchError(
                        "no observable objective decrease at grad norm %.3e and "
                        "the unit step does not shrink the gradient" % grad_norm
                    )
                alpha, trials = 1.0, 1
                x_new = x_cand

        x = x_new
        energy, p = eval_objective(reduced, model, prob, x)
        grad = gradient(reduced, prob, x, p)
        grad_norm = float(np.linalg.norm(grad))
        iterations += 1
        trace.append(
            IterRecord(iterations, energy, grad_norm, alpha, trials,
                       time.perf_counter() - start)
        )

    return SolverResult(
        x_star=x,
        objective=energy,
        grad_norm=grad_norm,
        iterations=iterations,
        converged=grad_norm < cfg.grad_tol,
        trace=tuple(trace),
    )


def write_trace_csv(trace, dest) -> None:
    """Write per-iteration records as CSV: iter,E,grad_norm,step,backtracks,time_s."""
    lines = ["iter,E,grad_norm,step,backtracks,time_s"]
    for rec in trace:
        lines.append(
            "%d,%s,%s,%s,%d,%s"
            % (
                rec.iteration,
                format(rec.objective, ".17g"),
                format(rec.grad_norm, ".17g"),
                format(rec.step_size, ".17g"),
                rec.backtrack_count,
                format(rec.elapsed_seconds, ".17g"),
            )
        )
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)
