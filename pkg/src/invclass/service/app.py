"""FastAPI application: an in-memory model registry plus solve/path endpoints.

The registry keys models by a content hash so re-uploading is idempotent, and
reductions are cached per (model, target class) since every solve against the
same pair reuses them.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time

import numpy as np
from fastapi import FastAPI, HTTPException

from ..baselines import BaselineConfig, solve_baseline
from ..errors import InverseClassificationError, ModelFormatError, PathSolveError
from ..logistic import solve_closed_form
from ..model import SoftmaxModel, reduce
from ..newton import SolverConfig, solve_newton
from ..objective import Problem, eval_objective, gradient, target_neg_log_prob
from ..path import PathConfig, solve_path
from .schemas import (
    ModelInfo,
    ModelPayload,
    PathEntryOut,
    PathRequest,
    PathResponse,
    SolveRequest,
    SolveResponse,
)

_BASELINES = ("gd", "cg", "cg_pr", "lbfgs", "bfgs")


class _Registry:
    def __init__(self):
        self._models = {}
        self._reduced = {}
        self._lock = threading.Lock()

    def add(self, payload: ModelPayload) -> ModelInfo:
        try:
            model = SoftmaxModel(
                weights=np.asarray(payload.weights, dtype=np.float64),
                biases=np.asarray(payload.biases, dtype=np.float64),
            )
        except (ValueError, ModelFormatError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if model.class_count != payload.K or model.feature_dim != payload.D:
            raise HTTPException(
                status_code=400,
                detail="declared K/D (%d/%d) do not match the arrays (%d/%d)"
                % (payload.K, payload.D, model.class_count, model.feature_dim),
            )
        digest = hashlib.sha256(
            json.dumps(
                {"weights": payload.weights, "biases": payload.biases}
            ).encode()
        ).hexdigest()[:12]
        with self._lock:
            self._models[digest] = model
        return ModelInfo(model_id=digest, K=model.class_count, D=model.feature_dim)

    def get(self, model_id: str) -> SoftmaxModel:
        with self._lock:
            model = self._models.get(model_id)
        if model is None:
            raise HTTPException(status_code=404, detail="unknown model %r" % model_id)
        return model

    def reduced(self, model_id: str, target_class: int):
        model = self.get(model_id)
        key = (model_id, target_class)
        with self._lock:
            cached = self._reduced.get(key)
        if cached is not None:
            return model, cached
        red = reduce(model, target_class)
        with self._lock:
            self._reduced[key] = red
        return model, red

    def infos(self) -> list:
        with self._lock:
            items = sorted(self._models.items())
        return [
            ModelInfo(model_id=mid, K=m.class_count, D=m.feature_dim)
            for mid, m in items
        ]


def _validated_problem(model: SoftmaxModel, instance, target_class, lam) -> Problem:
    x = np.asarray(instance, dtype=np.float64)
    if x.shape != (model.feature_dim,):
        raise HTTPException(
            status_code=400,
            detail="instance has %d entries, model expects %d"
            % (x.size, model.feature_dim),
        )
    if not 1 <= target_class <= model.class_count:
        raise HTTPException(
            status_code=400,
            detail="target_class %d outside 1..%d" % (target_class, model.class_count),
        )
    try:
        return Problem(source=x, target_class=target_class, lam=lam)
    except ValueError as exc:  # non-finite entries and the like
        raise HTTPException(status_code=400, detail=str(exc))


def create_app() -> FastAPI:
    service = FastAPI(title="inverse classification service")
    registry = _Registry()

    @service.get("/health")
    def health():
        return {"status": "ok"}

    @service.post("/models", response_model=ModelInfo)
    def register_model(payload: ModelPayload) -> ModelInfo:
        return registry.add(payload)

    @service.get("/models", response_model=list[ModelInfo])
    def list_models() -> list:
        return registry.infos()

    @service.get("/models/{model_id}", response_model=ModelInfo)
    def model_info(model_id: str) -> ModelInfo:
        model = registry.get(model_id)
        return ModelInfo(
            model_id=model_id, K=model.class_count, D=model.feature_dim
        )

    @service.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        model = registry.get(req.model_id)
        prob = _validated_problem(model, req.instance, req.target_class, req.lam)
        start = time.perf_counter()
        try:
            if req.solver == "closed-form":
                if model.class_count != 2:
                    raise HTTPException(
                        status_code=400, detail="closed form requires K=2"
                    )
                x_star, _ = solve_closed_form(
                    model, prob.source, req.target_class, req.lam
                )
                _, red = registry.reduced(req.model_id, req.target_class)
                e_val, p = eval_objective(red, model, prob, x_star)
                gn = float(np.linalg.norm(gradient(red, prob, x_star, p)))
                iterations, converged = 0, True
            else:
                _, red = registry.reduced(req.model_id, req.target_class)
                if req.solver == "newton":
                    cfg = SolverConfig(
                        grad_tol=req.tol,
                        max_iter=req.max_iter,
                        line_search=req.line_search or "backtracking",
                    )
                    res = solve_newton(red, model, prob, cfg=cfg)
                elif req.solver in _BASELINES:
                    cfg = BaselineConfig(
                        method="cg_pr" if req.solver == "cg" else req.solver,
                        line_search=req.line_search,
                        grad_tol=req.tol,
                        max_iter=req.max_iter,
                    )
                    res = solve_baseline(red, model, prob, cfg=cfg)
                else:
                    raise HTTPException(
                        status_code=400, detail="unknown solver %r" % req.solver
                    )
                x_star = res.x_star
                e_val, gn = res.objective, res.grad_norm
                iterations, converged = res.iterations, res.converged
        except (InverseClassificationError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        seconds = time.perf_counter() - start
        _, red = registry.reduced(req.model_id, req.target_class)
        p_target = math.exp(-target_neg_log_prob(red, x_star))
        return SolveResponse(
            x_star=[float(v) for v in x_star],
            objective=float(e_val),
            grad_norm=float(gn),
            iterations=iterations,
            converged=converged,
            p_target=p_target,
            seconds=seconds,
        )

    @service.post("/path", response_model=PathResponse)
    def path(req: PathRequest) -> PathResponse:
        model = registry.get(req.model_id)
        # validates shapes and target class; lambda comes from the grid
        _validated_problem(model, req.instance, req.target_class, 1.0)
        if not req.lambda_end < req.lambda_start:
            raise HTTPException(
                status_code=400, detail="need lambda_end < lambda_start"
            )
        _, red = registry.reduced(req.model_id, req.target_class)
        cfg = PathConfig(
            lambda_max=req.lambda_start,
            lambda_min=req.lambda_end,
            num_points=req.num,
            warm_start=req.warm_start,
            solver_cfg=SolverConfig(grad_tol=req.tol, max_iter=req.max_iter),
        )
        source = np.asarray(req.instance, dtype=np.float64)
        try:
            result = solve_path(red, model, source, req.target_class, cfg)
        except PathSolveError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        entries = [
            PathEntryOut(
                lam=e.lam,
                objective=e.objective,
                p_target=e.p_target,
                iterations=e.iterations,
                seconds=e.elapsed_seconds,
                x_star=[float(v) for v in e.x_star]
                if req.include_solutions
                else None,
            )
            for e in result.entries
        ]
        return PathResponse(entries=entries, total_seconds=result.total_seconds)

    return service


app = create_app()
