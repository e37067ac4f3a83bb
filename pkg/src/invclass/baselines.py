"""First-order and quasi-Newton baselines sharing the Newton solver's contract.

Methods: steepest descent (gd), Polak-Ribiere conjugate gradient (cg_pr),
limited-memory BFGS (lbfgs), and full BFGS with a dense inverse-Hessian
approximation (bfgs; O(D^2) memory, which is the point of comparison).
Line searches: strong Wolfe, plain backtracking, or a constant step 1/L.
Per-method defaults follow the usual practice for these methods: Wolfe for
gd/cg_pr, backtracking for lbfgs/bfgs.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import LineSearchError
from .linesearch import (
    backtracking_search,
    decrease_below_resolution,
    stalled_step_acceptable,
    wolfe_search,
)
from .model import ReducedModel, SoftmaxModel
from .newton import IterRecord, SolverResult
from .objective import Problem, eval_objective, gradient, lipschitz_bound

_METHODS = ("gd", "cg_pr", "lbfgs", "bfgs")
_DEFAULT_LINE_SEARCH = {"gd": "wolfe", "cg_pr": "wolfe", "lbfgs": "backtracking", "bfgs": "backtracking"}

# Relative curvature floor below which quasi-Newton pairs are discarded.
_CURVATURE_FLOOR = 1e-10


@dataclass(frozen=True)
class BaselineConfig:
    """Settings for one baseline method run."""

    method: str = "gd"
    line_search: str | None = None  # None = the method's customary default
    lbfgs_memory: int = 4
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-8
    max_iter: int = 1000
    backtrack_factor: float = 0.8
    max_backtracks: int = 100

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError("method must be one of %s" % (_METHODS,))
        if self.line_search not in (None, "wolfe", "backtracking", "constant"):
            raise ValueError("unknown line search %r" % self.line_search)
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be at least 1")
        if not self.grad_tol > 0 or self.max_iter < 1 or not 0 < self.backtrack_factor < 1:
            raise ValueError("invalid iteration settings")

    @property
    def resolved_line_search(self) -> str:
        return self.line_search or _DEFAULT_LINE_SEARCH[self.method]


def _lbfgs_direction(grad, pairs, gamma):
    """Two-loop recursion applying the implicit inverse Hessian to -grad."""
    q = grad.copy()
    coeffs = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        q -= a * y
        coeffs.append(a)
    q *= gamma
    for (s, y, rho), a in zip(pairs, reversed(coeffs)):
        b = rho * float(y @ q)
        q += s * (a - b)
    return -q


def solve_baseline(
    reduced: ReducedModel,
    model: SoftmaxModel,
    prob: Problem,
    x0: np.ndarray | None = None,
    cfg: BaselineConfig | None = None,
) -> SolverResult:
    """Minimize E with the configured baseline method.

    Same stopping rule, result, and trace contract as ``solve_newton``:
    stop when ||grad E|| < grad_tol or after max_iter iterations, recording
    every accepted step. For Wolfe runs the record's backtrack_count holds
    zero (trial counting belongs to the backtracking search).
    """
    cfg = cfg or BaselineConfig()
    method = cfg.method
    ls = cfg.resolved_line_search
    x = np.array(prob.source if x0 is None else x0, dtype=np.float64, copy=True)
    start = time.perf_counter()

    def eval_e(y):
        return eval_objective(reduced, model, prob, y)[0]

    def eval_g(y):
        _, p_y = eval_objective(reduced, model, prob, y)
        return gradient(reduced, prob, y, p_y)

    energy, p = eval_objective(reduced, model, prob, x)
    grad = gradient(reduced, prob, x, p)
    grad_norm = float(np.linalg.norm(grad))
    trace = [IterRecord(0, energy, grad_norm, 0.0, 0, time.perf_counter() - start)]

    lipschitz = lipschitz_bound(reduced, prob)
    grad_prev = None
    d_prev = None
    slope_prev = None
    alpha_prev = None
    pairs = deque(maxlen=cfg.lbfgs_memory)  # (s, y, 1/s.y) for lbfgs
    gamma = 1.0 / prob.lam  # matches the smallest curvature of the Hessian
    h_inv = None  # dense inverse-Hessian approximation for bfgs

    iterations = 0
    while grad_norm >= cfg.grad_tol and iterations < cfg.max_iter:
        if method == "gd":
            d = -grad
        elif method == "cg_pr":
            if grad_prev is None:
                d = -grad
            else:
                beta = float(grad @ (grad - grad_prev)) / float(grad_prev @ grad_prev)
                d = -grad if beta < 0.0 else -grad + beta * d_prev
                if float(d @ grad) >= 0.0:
                    d = -grad  # restart: keep the descent precondition
        elif method == "lbfgs":
            d = _lbfgs_direction(grad, pairs, gamma)
            if float(d @ grad) >= 0.0:
                pairs.clear()
                d = -grad
        else:  # bfgs
            if h_inv is None:
                h_inv = np.eye(x.size) / prob.lam
            d = -(h_inv @ grad)
            if float(d @ grad) >= 0.0:
                h_inv = np.eye(x.size) / prob.lam
                d = -(h_inv @ grad)

        slope = float(grad @ d)
        grad_new = None
        if ls == "constant":  # step 1/L along the raw direction
            alpha, trials = 1.0 / lipschitz, 0
            e_new = None
        else:
            if ls == "wolfe":
                if method in ("lbfgs", "bfgs") or slope_prev is None:
                    alpha_init = 1.0 if method in ("lbfgs", "bfgs") else 1.0 / lipschitz
                else:
                    # slope-ratio guess: the step that worked last time, rescaled
                    alpha_init = alpha_prev * slope_prev / slope
                    alpha_init = min(max(alpha_init, 1e-12), 1e8)
            else:
                alpha_init = 1.0
            searched = False
            if not decrease_below_resolution(energy, slope, alpha_init):
                try:
                    if ls == "wolfe":
                        alpha, e_new, grad_new = wolfe_search(
                            eval_e, eval_g, x, d, alpha_init,
                            c1=cfg.wolfe_c1, c2=cfg.wolfe_c2, f0=energy, g0=grad,
                        )
                        trials = 0
                    else:
                        alpha, e_new, trials = backtracking_search(
                            eval_e, x, d, energy, cfg.backtrack_factor,
                            cfg.max_backtracks,
                        )
                    searched = True
                except LineSearchError:
                    pass  # probe the nominal step below
            if not searched:
                # sub-ulp objective differences near the minimizer; accept the
                # nominal step only if the gradient shrinks decisively
                x_cand = x + alpha_init * d
                e_cand = eval_e(x_cand)
                g_cand = eval_g(x_cand)
                if not stalled_step_acceptable(
                    energy, grad_norm, e_cand, float(np.linalg.norm(g_cand))
                ):
                    # a first-order step cannot buy a decrease that double
                    # precision can represent; stop at the current iterate
                    # and let converged=False carry the verdict
                    break
                alpha, trials = alpha_init, 1
                e_new, grad_new = e_cand, g_cand

        x_new = x + alpha * d
        if grad_new is None:
            grad_new = eval_g(x_new)
        if e_new is None:
            e_new = eval_e(x_new)

        if method in ("lbfgs", "bfgs"):
            s = x_new - x
            y = grad_new - grad
            sy = float(s @ y)
            if sy > _CURVATURE_FLOOR * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                if method == "lbfgs":
                    pairs.append((s, y, 1.0 / sy))
                    gamma = sy / float(y @ y)
                else:
                    rho = 1.0 / sy
                    hy = h_inv @ y
                    h_inv -= rho * (np.outer(s, hy) + np.outer(hy, s))
                    h_inv += rho * (1.0 + rho * float(y @ hy)) * np.outer(s, s)

        grad_prev, d_prev = grad, d
        slope_prev, alpha_prev = slope, alpha
        x, energy, grad = x_new, e_new, grad_new
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
