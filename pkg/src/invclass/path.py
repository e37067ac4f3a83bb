"""Trade-off sweeps: the warm-started lambda path and the constrained solve.

Solving over a decreasing lambda grid yields counterfactual inputs at a range
of distances from the source. Warm starting each grid point from its
predecessor's solution makes the sweep cheap because neighboring solutions
are close. The constrained form "closest x with -ln p_k(x) <= alpha" is
solved by bisecting on lambda, using that the achieved -ln p_k grows with
lambda.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path as _FsPath

import numpy as np

from .errors import InfeasibleTargetError, InverseClassificationError, PathSolveError
from .model import ReducedModel, SoftmaxModel
from .newton import SolverConfig, SolverResult, solve_newton
from .objective import Problem, target_neg_log_prob

# Per-point gradient tolerance scale. Stopping at ||grad|| <= this * lambda
# bounds the solution error ||x - x*(lambda)|| by the same constant at every
# grid point, so warm and cold sweeps agree uniformly; a flat tolerance would
# let the error grow like tol/lambda at the small end of the grid.
_ACCURACY_SCALE = 2.5e-7


def _point_cfg(base: SolverConfig, lam: float) -> SolverConfig:
    tol = min(base.grad_tol, _ACCURACY_SCALE * lam)
    if tol >= base.grad_tol:
        return base
    return replace(base, grad_tol=tol)


@dataclass(frozen=True)
class PathConfig:
    """Grid and solver settings for a lambda sweep (log-spaced, descending)."""

    lambda_max: float = 1e3
    lambda_min: float = 1e-5
    num_points: int = 100
    spacing: str = "log"
    warm_start: bool = True
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not 0 < self.lambda_min < self.lambda_max:
            raise ValueError("need 0 < lambda_min < lambda_max")
        if self.num_points < 1:
            raise ValueError("num_points must be at least 1")
        if self.spacing != "log":
            raise ValueError("only log spacing is supported")

    def grid(self) -> np.ndarray:
        return np.geomspace(self.lambda_max, self.lambda_min, self.num_points)


@dataclass(frozen=True)
class PathEntry:
    lam: float
    x_star: np.ndarray
    objective: float
    p_target: float
    iterations: int
    elapsed_seconds: float


@dataclass(frozen=True)
class PathResult:
    entries: tuple
    total_seconds: float


def solve_path(
    reduced: ReducedModel,
    model: SoftmaxModel,
    source: np.ndarray,
    target_class: int,
    cfg: PathConfig | None = None,
) -> PathResult:
    """Solve the problem at every grid lambda, largest first.

    With warm_start each solve initializes from the previous solution; the
    first (and every cold) solve starts from the source instance. A grid
    point that fails to converge aborts the sweep with a PathSolveError whose
    ``partial`` attribute carries the finished entries.
    """
    cfg = cfg or PathConfig()
    source = np.asarray(source, dtype=np.float64)
    entries = []
    x0 = source
    sweep_start = time.perf_counter()
    for lam in cfg.grid():
        prob = Problem(source, target_class, float(lam))
        entry_start = time.perf_counter()
        try:
            res = solve_newton(
                reduced, model, prob, x0=x0, cfg=_point_cfg(cfg.solver_cfg, float(lam))
            )
        except InverseClassificationError as exc:
            partial = PathResult(tuple(entries), time.perf_counter() - sweep_start)
            raise PathSolveError(
                "solve at lambda=%.6g failed: %s" % (lam, exc), partial=partial
            ) from exc
        if not res.converged:
            partial = PathResult(tuple(entries), time.perf_counter() - sweep_start)
            raise PathSolveError(
                "solve at lambda=%.6g stopped at grad norm %.3e without converging"
                % (lam, res.grad_norm),
                partial=partial,
            )
        p_target = math.exp(-target_neg_log_prob(reduced, res.x_star))
        entries.append(
            PathEntry(
                lam=float(lam),
                x_star=res.x_star,
                objective=res.objective,
                p_target=p_target,
                iterations=res.iterations,
                elapsed_seconds=time.perf_counter() - entry_start,
            )
        )
        if cfg.warm_start:
            x0 = res.x_star
    return PathResult(tuple(entries), time.perf_counter() - sweep_start)


def constrained_solve(
    reduced: ReducedModel,
    model: SoftmaxModel,
    source: np.ndarray,
    target_class: int,
    alpha_target: float,
    tol: float = 1e-3,
    solver_cfg: SolverConfig | None = None,
):
    """Closest x to ``source`` with -ln p_k(x) <= alpha_target.

    Trades the constraint for the penalized objective and bisects on
    log(lambda) over [1e-12, 1e12] (at most 200 steps, warm-started): larger
    lambda keeps x nearer the source and raises the achieved -ln p_k, so the
    wanted lambda is the largest feasible one. Stops once the achieved value
    lands in [alpha_target * (1 - tol), alpha_target].

    Returns
    -------
    (x, lambda_used)
        ``lambda_used`` is ``inf`` when the source is already feasible.

    Raises
    ------
    InfeasibleTargetError
        If no lambda in the bracket reaches alpha_target (for instance when
        the reduced weights are zero and -ln p_k is constant).
    """
    if not alpha_target > 0:
        raise ValueError("alpha_target must be positive")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    solver_cfg = solver_cfg or SolverConfig()
    source = np.asarray(source, dtype=np.float64)

    g_source = target_neg_log_prob(reduced, source)
    if g_source <= alpha_target:
        return source.copy(), math.inf

    lo, hi = 1e-12, 1e12

    source_scale = 1.0 + float(np.linalg.norm(source))

    def solve_at(lam, x0):
        # at very stiff lambda the iterate can only approach the source to
        # within one ulp per coordinate, so the stationarity residual bottoms
        # out near lambda*eps*|x|; requiring less is unsatisfiable. The
        # corresponding solution error grad_tol/lambda stays at the eps level.
        floor = 64.0 * np.finfo(np.float64).eps * lam * source_scale
        cfg_lam = solver_cfg
        if floor > cfg_lam.grad_tol:
            cfg_lam = replace(cfg_lam, grad_tol=floor)
        prob = Problem(source, target_class, lam)
        res = solve_newton(reduced, model, prob, x0=x0, cfg=cfg_lam)
        if not res.converged:
            raise InfeasibleTargetError(
                "inner solve at lambda=%.3e did not converge" % lam
            )
        return res.x_star, target_neg_log_prob(reduced, res.x_star)

    x_lo, g_lo = solve_at(lo, source)
    if g_lo > alpha_target:
        raise InfeasibleTargetError(
            "-ln p_k reaches only %.6g at lambda=%.0e, above the target %.6g"
            % (g_lo, lo, alpha_target)
        )
    if g_lo >= alpha_target * (1.0 - tol):
        return x_lo, lo
    x_hi, g_hi = solve_at(hi, x_lo)
    if g_hi <= alpha_target:
        # even the stiffest lambda in the bracket satisfies the constraint
        return x_hi, hi

    best_x, best_lam = x_lo, lo
    warm = x_hi
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        x_mid, g_mid = solve_at(mid, warm)
        warm = x_mid
        # the achieved -ln p_k should grow with lambda; report drift, don't hide it
        slack = 1e-7 * (1.0 + abs(g_mid))
        if g_mid < g_lo - slack or g_mid > g_hi + slack:
            warnings.warn(
                "-ln p_k at lambda=%.3e is %.9g, outside the bracketing values "
                "[%.9g, %.9g]; monotonicity assumption violated"
                % (mid, g_mid, g_lo, g_hi),
                RuntimeWarning,
                stacklevel=2,
            )
        if g_mid > alpha_target:
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
            best_x, best_lam = x_mid, mid
            if g_mid >= alpha_target * (1.0 - tol):
                return best_x, best_lam
    raise InfeasibleTargetError(
        "bisection exhausted 200 steps without landing in "
        "[%.6g, %.6g]; best -ln p_k %.6g at lambda=%.3e"
        % (alpha_target * (1.0 - tol), alpha_target, g_lo, best_lam)
    )


def write_path_csv(result: PathResult, dest) -> None:
    """Write path entries as CSV: lambda,E,p_target,iterations,time_s."""
    lines = ["lambda,E,p_target,iterations,time_s"]
    for e in result.entries:
        lines.append(
            "%s,%s,%s,%d,%s"
            % (
                format(e.lam, ".17g"),
                format(e.objective, ".17g"),
                format(e.p_target, ".17g"),
                e.iterations,
                format(e.elapsed_seconds, ".17g"),
            )
        )
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, _FsPath)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def write_path_solutions(result: PathResult, directory) -> list:
    """Dump one solution-vector CSV per entry into ``directory``.

    Files are named solution_000.csv, solution_001.csv, ... in grid order.
    Returns the written paths.
    """
    from .model import save_instance

    directory = _FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for idx, entry in enumerate(result.entries):
        dest = directory / ("solution_%03d.csv" % idx)
        save_instance(entry.x_star, dest)
        written.append(dest)
    return written
