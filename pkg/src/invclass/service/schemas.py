"""Request/response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class ModelPayload(BaseModel):
    """A dense linear classifier, row-major weights."""

    K: int = Field(ge=2)
    D: int = Field(ge=1)
    biases: list[float]
    weights: list[list[float]]


class ModelInfo(BaseModel):
    model_id: str
    K: int
    D: int


class SolveRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model_id: str
    instance: list[float]
    target_class: int = Field(ge=1)
    lam: float = Field(alias="lambda", gt=0)
    solver: str = "newton"
    line_search: str | None = None
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=1000, ge=1)


class SolveResponse(BaseModel):
    x_star: list[float]
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    p_target: float
    seconds: float


class PathRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model_id: str
    instance: list[float]
    target_class: int = Field(ge=1)
    lambda_start: float = Field(default=1e3, gt=0)
    lambda_end: float = Field(default=1e-5, gt=0)
    num: int = Field(default=100, ge=1)
    warm_start: bool = True
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=1000, ge=1)
    include_solutions: bool = False


class PathEntryOut(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float = Field(serialization_alias="lambda")
    objective: float
    p_target: float
    iterations: int
    seconds: float
    x_star: list[float] | None = None


class PathResponse(BaseModel):
    entries: list[PathEntryOut]
    total_seconds: float
