"""Command-line front end: solve, path, bench, compare, serve.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 solver failure
or non-convergence. Error messages go to standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, solve_baseline
from .bench import (
    SuiteSpec,
    format_comparison_table,
    generate_problem_suite,
    generate_synthetic_model,
    run_benchmark,
)
from .errors import (
    InverseClassificationError,
    ModelFormatError,
    PathSolveError,
)
from .logistic import solve_closed_form
from .model import (
    format_vector,
    load_instance,
    load_model,
    reduce,
    save_instance,
)
from .newton import SolverConfig, solve_newton, write_trace_csv
from .objective import Problem, eval_objective, gradient, target_neg_log_prob
from .path import PathConfig, solve_path, write_path_csv, write_path_solutions

_G17 = lambda v: format(float(v), ".17g")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invclass",
        description="Closest-input solves for linear softmax classifiers.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_model_flags(p):
        p.add_argument("--model", help="model JSON file")
        p.add_argument("--weights", help="weights CSV (one row per class)")
        p.add_argument("--biases", help="biases CSV (single row)")
        p.add_argument("--instance", required=True, help="source instance file")
        p.add_argument("--target-class", type=int, required=True, dest="target_class")

    p_solve = sub.add_parser("solve", help="solve one problem")
    add_model_flags(p_solve)
    p_solve.add_argument("--lambda", type=float, required=True, dest="lam")
    p_solve.add_argument(
        "--solver",
        choices=["newton", "gd", "cg", "lbfgs", "bfgs", "closed-form"],
        default="newton",
    )
    p_solve.add_argument(
        "--ls", choices=["backtracking", "wolfe", "constant"], default=None
    )
    p_solve.add_argument("--tol", type=float, default=1e-8)
    p_solve.add_argument("--max-iter", type=int, default=1000, dest="max_iter")
    p_solve.add_argument("--trace", help="write per-iteration CSV here")
    p_solve.add_argument("--out", help="write the solution vector here")

    p_path = sub.add_parser("path", help="trace solutions over a lambda grid")
    add_model_flags(p_path)
    p_path.add_argument(
        "--lambda-start", type=float, default=1e3, dest="lambda_start"
    )
    p_path.add_argument("--lambda-end", type=float, default=1e-5, dest="lambda_end")
    p_path.add_argument("--num", type=int, default=100)
    p_path.add_argument(
        "--no-warm-start", action="store_true", dest="no_warm_start"
    )
    p_path.add_argument("--tol", type=float, default=1e-8)
    p_path.add_argument("--max-iter", type=int, default=1000, dest="max_iter")
    p_path.add_argument("--out", help="path CSV destination (default: stdout)")
    p_path.add_argument(
        "--solutions-dir", dest="solutions_dir", help="dump per-point solutions here"
    )

    p_bench = sub.add_parser("bench", help="run the benchmark harness")
    p_bench.add_argument("--spec", required=True, help="suite spec JSON")
    p_bench.add_argument("--out", required=True, help="report CSV destination")
    p_bench.add_argument(
        "--methods", help="comma-separated method labels (default: all five)"
    )
    p_bench.add_argument("--tol", type=float, default=1e-8)
    p_bench.add_argument("--max-iter", type=int, default=1000, dest="max_iter")
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--trace-dir", dest="trace_dir")

    p_cmp = sub.add_parser(
        "compare", help="run all solvers on one problem and print the gap table"
    )
    add_model_flags(p_cmp)
    p_cmp.add_argument("--lambda", type=float, required=True, dest="lam")
    p_cmp.add_argument("--tol", type=float, default=1e-8)
    p_cmp.add_argument("--max-iter", type=int, default=1000, dest="max_iter")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _load_model_from_args(args):
    if args.model and (args.weights or args.biases):
        raise ModelFormatError("pass either --model or --weights/--biases, not both")
    if args.model:
        return load_model(args.model, format="json")
    if args.weights and args.biases:
        return load_model((args.weights, args.biases), format="csv-pair")
    raise ModelFormatError("a model is required: --model or --weights plus --biases")


def _load_problem_inputs(args):
    model = _load_model_from_args(args)
    source = load_instance(args.instance)
    if source.shape != (model.feature_dim,):
        raise ModelFormatError(
            "instance has %d entries, model expects %d"
            % (source.size, model.feature_dim)
        )
    if not 1 <= args.target_class <= model.class_count:
        raise ModelFormatError(
            "target class %d outside 1..%d" % (args.target_class, model.class_count)
        )
    return model, source


def _cmd_solve(args) -> int:
    model, source = _load_problem_inputs(args)
    prob = Problem(source=source, target_class=args.target_class, lam=args.lam)

    start = time.perf_counter()
    if args.solver == "closed-form":
        if model.class_count != 2:
            raise ModelFormatError("closed form requires K=2")
        x_star, _ = solve_closed_form(model, source, args.target_class, args.lam)
        reduced = reduce(model, args.target_class)
        e_val, p = eval_objective(reduced, model, prob, x_star)
        grad_norm = float(np.linalg.norm(gradient(reduced, prob, x_star, p)))
        iterations = 0
        trace = None
    else:
        reduced = reduce(model, args.target_class)
        if args.solver == "newton":
            cfg = SolverConfig(
                grad_tol=args.tol,
                max_iter=args.max_iter,
                line_search=args.ls or "backtracking",
            )
            res = solve_newton(reduced, model, prob, cfg=cfg)
        else:
            if args.ls == "constant":
                raise ModelFormatError("constant step is only wired up for newton")
            cfg = BaselineConfig(
                method="cg_pr" if args.solver == "cg" else args.solver,
                line_search=args.ls,
                grad_tol=args.tol,
                max_iter=args.max_iter,
            )
            res = solve_baseline(reduced, model, prob, cfg=cfg)
        if not res.converged:
            print(
                "solver stopped after %d iterations with grad norm %s (tol %s)"
                % (res.iterations, _G17(res.grad_norm), _G17(args.tol)),
                file=sys.stderr,
            )
            return 4
        x_star, e_val, grad_norm = res.x_star, res.objective, res.grad_norm
        iterations, trace = res.iterations, res.trace
    seconds = time.perf_counter() - start

    p_target = math.exp(-target_neg_log_prob(reduced, x_star))
    if args.trace and trace is not None:
        write_trace_csv(trace, args.trace)
    if args.out:
        save_instance(x_star, args.out)
    else:
        print(format_vector(x_star))
    print(
        "E=%s grad_norm=%s iterations=%d p_target=%s seconds=%s"
        % (_G17(e_val), _G17(grad_norm), iterations, _G17(p_target), _G17(seconds))
    )
    return 0


def _cmd_path(args) -> int:
    model, source = _load_problem_inputs(args)
    if not 0 < args.lambda_end < args.lambda_start:
        raise ModelFormatError("need 0 < --lambda-end < --lambda-start")
    reduced = reduce(model, args.target_class)
    cfg = PathConfig(
        lambda_max=args.lambda_start,
        lambda_min=args.lambda_end,
        num_points=args.num,
        warm_start=not args.no_warm_start,
        solver_cfg=SolverConfig(grad_tol=args.tol, max_iter=args.max_iter),
    )
    try:
        result = solve_path(reduced, model, source, args.target_class, cfg)
    except PathSolveError as exc:
        if args.out and exc.partial is not None and exc.partial.entries:
            write_path_csv(exc.partial, args.out)
            print("partial path written to %s" % args.out, file=sys.stderr)
        print("path solve failed: %s" % exc, file=sys.stderr)
        return 4
    if args.out:
        write_path_csv(result, args.out)
    else:
        write_path_csv(result, sys.stdout)
    if args.solutions_dir:
        write_path_solutions(result, args.solutions_dir)
    print(
        "path finished: %d points in %s s"
        % (len(result.entries), _G17(result.total_seconds)),
        file=sys.stderr,
    )
    return 0


def _read_suite_spec(path) -> SuiteSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ModelFormatError("suite spec must be a JSON object")
    allowed = {
        "D",
        "K",
        "seed",
        "count_far",
        "count_near",
        "lambda_far",
        "lambda_near",
        "weight_scale",
    }
    unknown = set(raw) - allowed
    if unknown:
        raise ModelFormatError(
            "unknown suite spec fields: %s" % ", ".join(sorted(unknown))
        )
    for key in ("D", "K", "seed"):
        if key not in raw:
            raise ModelFormatError("suite spec is missing %r" % key)
    try:
        return SuiteSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError("bad suite spec: %s" % exc) from exc


def _cmd_bench(args) -> int:
    spec = _read_suite_spec(args.spec)
    methods = None
    if args.methods:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    model = generate_synthetic_model(spec.D, spec.K, spec.seed, spec.weight_scale)
    suite = generate_problem_suite(model, spec)
    report = run_benchmark(
        model,
        suite,
        methods=methods,
        cfg=SolverConfig(grad_tol=args.tol, max_iter=args.max_iter),
        repeats=args.repeats,
        jobs=args.jobs,
        trace_dir=args.trace_dir,
    )
    out = Path(args.out)
    report.to_csv(out)
    report.to_json(out.with_suffix(".json"))
    for label, agg in report.aggregates.items():
        print(
            "%s: %d/%d converged, median iterations %g, median runtime %.6f s"
            % (
                label,
                agg["converged"],
                agg["count"],
                agg["median_iterations"],
                agg["median_runtime_s"],
            )
        )
    return 0


def _cmd_compare(args) -> int:
    model, source = _load_problem_inputs(args)
    prob = Problem(source=source, target_class=args.target_class, lam=args.lam)
    report = run_benchmark(
        model,
        [prob],
        cfg=SolverConfig(grad_tol=args.tol, max_iter=args.max_iter),
        repeats=1,
    )
    sys.stdout.write(format_comparison_table(report))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0

    handlers = {
        "solve": _cmd_solve,
        "path": _cmd_path,
        "bench": _cmd_bench,
        "compare": _cmd_compare,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.subcommand](args)
    except (ModelFormatError, OSError, json.JSONDecodeError, ValueError) as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return 3
    except InverseClassificationError as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
