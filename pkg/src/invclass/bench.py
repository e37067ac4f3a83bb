"""Benchmark harness: synthetic suites and multi-method comparison runs.

Builds deterministic synthetic classifiers and problem suites, runs every
(problem, method) cell with a shared stopping rule, and aggregates per-method
iteration counts, runtimes, and objective-gap curves.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, solve_baseline
from .errors import InverseClassificationError
from .model import SoftmaxModel, reduce, softmax_eval
from .newton import SolverConfig, solve_newton, write_trace_csv
from .objective import Problem

_DEFAULT_METHODS = ("newton", "gd", "cg_pr", "lbfgs", "bfgs")

_LS_ALIASES = {
    "bt": "backtracking",
    "backtracking": "backtracking",
    "wolfe": "wolfe",
    "const": "constant",
    "constant": "constant",
}


@dataclass(frozen=True)
class SuiteSpec:
    """Recipe for a deterministic problem suite.

    Far problems target the least likely class under a mild pull toward the
    source (lambda_far); near problems target the runner-up class under a
    stronger pull (lambda_near).
    """

    D: int
    K: int
    seed: int
    count_far: int = 40
    count_near: int = 10
    lambda_far: float = 0.01
    lambda_near: float = 0.1
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.D < 1 or self.K < 2:
            raise ValueError("need D >= 1 and K >= 2")
        if self.count_far < 0 or self.count_near < 0:
            raise ValueError("problem counts must be nonnegative")
        if self.count_far + self.count_near == 0:
            raise ValueError("suite must contain at least one problem")
        if not (self.lambda_far > 0 and self.lambda_near > 0):
            raise ValueError("lambda values must be positive")
        if not self.weight_scale > 0:
            raise ValueError("weight_scale must be positive")


def generate_synthetic_model(
    D: int, K: int, seed: int, weight_scale: float = 1.0
) -> SoftmaxModel:
    """Random dense classifier with N(0, (weight_scale/sqrt(D))^2) entries.

    The 1/sqrt(D) factor keeps logit magnitudes roughly D-independent.
    Deterministic under (D, K, seed, weight_scale); weights are drawn before
    biases.
    """
    if D < 1 or K < 2:
        raise ValueError("need D >= 1 and K >= 2")
    if weight_scale < 0:
        raise ValueError("weight_scale must be nonnegative")
    rng = np.random.default_rng(seed)
    scale = weight_scale / math.sqrt(D)
    weights = rng.standard_normal((K, D)) * scale
    biases = rng.standard_normal(K) * scale
    return SoftmaxModel(weights=weights, biases=biases)


def generate_problem_suite(model: SoftmaxModel, spec: SuiteSpec) -> list:
    """Deterministic list of Problems: count_far far ones then count_near near ones.

    Source instances are standard normal, seeded per problem index so the
    suite is schedule-independent. Far problems pick the class with the
    smallest softmax probability at the source, near ones the second largest.
    """
    if model.feature_dim != spec.D or model.class_count != spec.K:
        raise ValueError("model dimensions do not match the suite spec")
    problems = []
    total = spec.count_far + spec.count_near
    for i in range(total):
        rng = np.random.default_rng((spec.seed, i))
        source = rng.standard_normal(spec.D)
        _, p, _ = softmax_eval(model, source)
        if i < spec.count_far:
            target = int(np.argmin(p)) + 1
            lam = spec.lambda_far
        else:
            target = int(np.argsort(p)[-2]) + 1
            lam = spec.lambda_near
        problems.append(Problem(source=source, target_class=target, lam=lam))
    return problems


@dataclass(frozen=True)
class BenchRecord:
    """Outcome of one (problem, method) cell."""

    problem_index: int
    method: str
    line_search: str
    lam: float
    target_class: int
    iterations: int
    converged: bool
    runtime_seconds: float
    final_objective: float
    final_grad_norm: float
    backtrack_bins: dict
    objective_curve: tuple
    x_star: np.ndarray | None
    failure: str | None = None


@dataclass(frozen=True)
class BenchReport:
    records: tuple
    aggregates: dict
    total_seconds: float

    def to_csv(self, dest) -> None:
        lines = [
            "problem_index,method,line_search,lambda,target_class,"
            "iterations,converged,runtime_s,final_E,final_grad_norm,failure"
        ]
        for r in self.records:
            lines.append(
                "%d,%s,%s,%s,%d,%d,%s,%s,%s,%s,%s"
                % (
                    r.problem_index,
                    r.method,
                    r.line_search,
                    format(r.lam, ".17g"),
                    r.target_class,
                    r.iterations,
                    "true" if r.converged else "false",
                    format(r.runtime_seconds, ".17g"),
                    format(r.final_objective, ".17g"),
                    format(r.final_grad_norm, ".17g"),
                    "" if r.failure is None else r.failure.replace(",", ";"),
                )
            )
        text = "\n".join(lines) + "\n"
        if isinstance(dest, (str, Path)):
            with open(dest, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            dest.write(text)

    def to_json(self, dest) -> None:
        payload = {
            "aggregates": self.aggregates,
            "total_seconds": self.total_seconds,
            "records": [
                {
                    "problem_index": r.problem_index,
                    "method": r.method,
                    "line_search": r.line_search,
                    "lambda": r.lam,
                    "target_class": r.target_class,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "runtime_seconds": r.runtime_seconds,
                    "final_objective": r.final_objective,
                    "final_grad_norm": r.final_grad_norm,
                    "backtrack_bins": {str(k): v for k, v in r.backtrack_bins.items()},
                    "objective_curve": list(r.objective_curve),
                    "failure": r.failure,
                }
                for r in self.records
            ],
        }
        text = json.dumps(payload, indent=2)
        if isinstance(dest, (str, Path)):
            with open(dest, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            dest.write(text)


def _parse_method(label: str):
    """Split "gd+wolfe" style labels into (method, line_search or None)."""
    base, _, suffix = label.partition("+")
    base = base.strip().lower()
    if base == "cg":
        base = "cg_pr"
    if base not in ("newton", "gd", "cg_pr", "lbfgs", "bfgs"):
        raise ValueError("unknown method %r" % label)
    ls = None
    if suffix:
        try:
            ls = _LS_ALIASES[suffix.strip().lower()]
        except KeyError:
            raise ValueError("unknown line search %r in %r" % (suffix, label)) from None
    if ls == "constant" and base != "newton":
        raise ValueError("constant step is only wired up for newton")
    return base, ls


def _run_cell(reduced, model, prob, method, ls, cfg, repeats):
    """One (problem, method) solve, timed over ``repeats`` runs (median)."""
    if method == "newton":
        run_cfg = SolverConfig(
            grad_tol=cfg.grad_tol,
            max_iter=cfg.max_iter,
            backtrack_factor=cfg.backtrack_factor,
            max_backtracks=cfg.max_backtracks,
            line_search=ls or cfg.line_search,
        )
        solve = lambda: solve_newton(reduced, model, prob, cfg=run_cfg)
        ls_used = run_cfg.line_search
    else:
        run_cfg = BaselineConfig(
            method=method,
            line_search=ls,
            grad_tol=cfg.grad_tol,
            max_iter=cfg.max_iter,
            backtrack_factor=cfg.backtrack_factor,
            max_backtracks=cfg.max_backtracks,
        )
        solve = lambda: solve_baseline(reduced, model, prob, cfg=run_cfg)
        ls_used = run_cfg.resolved_line_search

    times = []
    result = None
    failure = None
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        try:
            result = solve()
        except InverseClassificationError as exc:
            failure = "%s: %s" % (type(exc).__name__, exc)
            times.append(time.perf_counter() - start)
            break
        times.append(time.perf_counter() - start)
    runtime = float(np.median(times))

    if failure is not None:
        # failed cells are charged the full iteration budget so aggregate
        # medians cannot reward an early crash
        return dict(
            line_search=ls_used,
            iterations=cfg.max_iter,
            converged=False,
            runtime_seconds=runtime,
            final_objective=math.nan,
            final_grad_norm=math.nan,
            backtrack_bins={},
            objective_curve=(),
            x_star=None,
            failure=failure,
            trace=None,
        )

    bins = Counter(rec.backtrack_count for rec in result.trace[1:])
    return dict(
        line_search=ls_used,
        iterations=result.iterations,
        converged=result.converged,
        runtime_seconds=runtime,
        final_objective=result.objective,
        final_grad_norm=result.grad_norm,
        backtrack_bins=dict(sorted(bins.items())),
        objective_curve=tuple(rec.objective for rec in result.trace),
        x_star=result.x_star,
        failure=None,
        trace=result.trace,
    )


def run_benchmark(
    model: SoftmaxModel,
    suite,
    methods=None,
    cfg: SolverConfig | None = None,
    repeats: int = 3,
    jobs: int = 1,
    trace_dir=None,
) -> BenchReport:
    """Run every (problem, method) cell and aggregate.

    ``methods`` holds labels like "newton", "gd", "lbfgs+wolfe"; a "+suffix"
    overrides the method's default line search. ``cfg`` supplies the shared
    stopping rule (gradient tolerance, iteration cap). Timings are medians
    over ``repeats`` runs of the same deterministic solve. Individual solve
    failures are captured in the record, never aborting the sweep.
    """
    cfg = cfg or SolverConfig()
    labels = list(methods) if methods is not None else list(_DEFAULT_METHODS)
    parsed = [(lbl, *_parse_method(lbl)) for lbl in labels]
    suite = list(suite)

    reduced_cache = {}
    for prob in suite:
        if prob.target_class not in reduced_cache:
            reduced_cache[prob.target_class] = reduce(model, prob.target_class)

    cells = [
        (idx, prob, lbl, method, ls)
        for idx, prob in enumerate(suite)
        for (lbl, method, ls) in parsed
    ]

    def work(cell):
        idx, prob, lbl, method, ls = cell
        out = _run_cell(
            reduced_cache[prob.target_class], model, prob, method, ls, cfg, repeats
        )
        return idx, prob, lbl, out

    sweep_start = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(work, cells))
    else:
        outputs = [work(c) for c in cells]
    total = time.perf_counter() - sweep_start

    records = []
    for idx, prob, lbl, out in outputs:
        trace = out.pop("trace")
        if trace_dir is not None and trace is not None:
            directory = Path(trace_dir)
            directory.mkdir(parents=True, exist_ok=True)
            name = "trace_p%03d_%s.csv" % (idx, lbl.replace("+", "_"))
            write_trace_csv(trace, directory / name)
        records.append(
            BenchRecord(
                problem_index=idx,
                method=lbl,
                lam=prob.lam,
                target_class=prob.target_class,
                **out,
            )
        )
    records.sort(key=lambda r: (r.problem_index, labels.index(r.method)))

    aggregates = {}
    for lbl in labels:
        rows = [r for r in records if r.method == lbl]
        # iteration aggregates measure cost-to-tolerance: a run that never got
        # there (stalled or capped) is censored at the iteration budget
        iters = np.array(
            [r.iterations if r.converged else cfg.max_iter for r in rows],
            dtype=np.float64,
        )
        runtimes = np.array([r.runtime_seconds for r in rows], dtype=np.float64)
        ok = [r for r in rows if r.converged]
        aggregates[lbl] = {
            "count": len(rows),
            "converged": len(ok),
            "median_iterations": float(np.median(iters)),
            "mean_iterations": float(np.mean(iters)),
            "median_runtime_s": float(np.median(runtimes)),
            "mean_runtime_s": float(np.mean(runtimes)),
            "median_final_grad_norm": float(
                np.median([r.final_grad_norm for r in ok])
            )
            if ok
            else math.nan,
        }

    return BenchReport(records=tuple(records), aggregates=aggregates, total_seconds=total)


def _gap_reference(report: BenchReport) -> dict:
    """Per-problem reference objective: newton's final value where available."""
    refs = {}
    for r in report.records:
        if r.failure is not None or not r.objective_curve:
            continue
        is_newton = r.method.split("+")[0] == "newton"
        cur = refs.get(r.problem_index)
        if cur is None or (is_newton and not cur[0]):
            refs[r.problem_index] = (is_newton, r.final_objective)
        elif is_newton == cur[0] and r.final_objective < cur[1]:
            refs[r.problem_index] = (is_newton, r.final_objective)
    return {k: v[1] for k, v in refs.items()}


def format_comparison_table(report: BenchReport) -> str:
    """Median objective gap E_i - E* per method, by iteration.

    E* is the best objective reached on each problem (newton's final iterate
    when newton ran). Rows cover every iteration up to 20, then every 25th.
    Curves of finished solvers are padded with their final value.
    """
    refs = _gap_reference(report)
    methods = []
    for r in report.records:
        if r.method not in methods:
            methods.append(r.method)

    curves = {m: [] for m in methods}
    max_len = 0
    for r in report.records:
        if r.failure is not None or r.problem_index not in refs:
            continue
        gap = [e - refs[r.problem_index] for e in r.objective_curve]
        curves[r.method].append(gap)
        max_len = max(max_len, len(gap))
    if max_len == 0:
        return "no successful runs to compare\n"

    rows = [i for i in range(min(21, max_len))]
    rows += [i for i in range(25, max_len, 25)]
    if max_len - 1 not in rows:
        rows.append(max_len - 1)

    header = ["iter"] + methods
    table = [header]
    for i in rows:
        cells = ["%d" % i]
        for m in methods:
            vals = [
                gaps[min(i, len(gaps) - 1)] for gaps in curves[m] if gaps
            ]
            cells.append("%.3e" % float(np.median(vals)) if vals else "-")
        table.append(cells)

    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    out = []
    for row in table:
        out.append("  ".join(cell.rjust(widths[c]) for c, cell in enumerate(row)))
    return "\n".join(out) + "\n"
