"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

MethodName = Literal[
    "em-dirichlet",
    "hard-em-dirichlet",
    "hard-kmeans",
    "soft-kmeans",
    "em-gaussian-id",
    "em-gaussian-diag",
    "hard-kl-kmeans",
]


class SynthRequest(BaseModel):
    classes: int = Field(ge=1)
    alpha: str = Field(description="semicolon-separated rows of comma-separated positive reals")
    n: int = Field(ge=1)
    seed: int = 0
    proportions: Optional[str] = Field(default=None, description="comma-separated simplex vector")
    dataset_name: str = "synthetic"
    dtype: Literal["f32", "f64"] = "f64"
    out: str


class SynthResponse(BaseModel):
    out: str
    manifest: str
    n_samples: int
    dim: int
    label_histogram: list[int]
    resolved_config: dict


class ClusterRequest(BaseModel):
    container: str
    method: MethodName
    n_tasks: int = Field(default=1000, ge=1)
    query_size: int = Field(default=75, ge=1)
    min_classes: int = Field(default=3, ge=1)
    max_classes: int = Field(default=10, ge=1)
    seed: int = 0
    lambda_scale: float = Field(default=1.0, ge=0.0)
    no_barrier: bool = False
    no_mdl: bool = False
    matching: bool = True
    workers: int = Field(default=1, ge=1)
    out: Optional[str] = None


class FewshotRequest(BaseModel):
    container: str
    method: MethodName
    shots: int = Field(default=4, ge=0)
    k_eff: int = Field(default=5, ge=1)
    query_size: int = Field(default=75, ge=1)
    n_tasks: int = Field(default=1000, ge=1)
    seed: int = 0
    lambda_scale: float = Field(default=1.0, ge=0.0)
    no_barrier: bool = False
    no_mdl: bool = False
    workers: int = Field(default=1, ge=1)
    out: Optional[str] = None


class ReportResponse(BaseModel):
    method: str
    mean_accuracy: float
    mean_task_seconds: float
    n_tasks: int
    per_task_accuracies: list[float]
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    resolved_config: dict


class FitRequest(BaseModel):
    container: str
    algo: Literal["quadratic", "minka"] = "quadratic"
    eps: float = Field(default=1e-13, gt=0.0)
    max_iter: int = Field(default=1000, ge=1)
    init: Optional[str] = Field(default=None, description="comma-separated positive reals")


class FitResponse(BaseModel):
    algo: str
    alpha: list[float]
    iterations: int
    converged: bool
    final_objective: float
    seconds: float
    resolved_config: dict


class SweepRequest(BaseModel):
    container: str
    method: MethodName
    sweep: Literal["query-size", "shots"]
    values: list[int] = Field(min_length=1)
    n_tasks: int = Field(default=100, ge=1)
    query_size: int = Field(default=75, ge=1)
    min_classes: int = Field(default=3, ge=1)
    max_classes: int = Field(default=10, ge=1)
    shots: int = Field(default=4, ge=0)
    k_eff: int = Field(default=5, ge=1)
    seed: int = 0
    lambda_scale: float = Field(default=1.0, ge=0.0)
    no_barrier: bool = False
    no_mdl: bool = False
    matching: bool = True
    workers: int = Field(default=1, ge=1)
    out: Optional[str] = None


class SweepPoint(BaseModel):
    value: int
    mean_accuracy: float
    mean_task_seconds: float


class SweepResponse(BaseModel):
    method: str
    sweep: str
    points: list[SweepPoint]
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    resolved_config: dict


class InspectRequest(BaseModel):
    container: str


class HealthResponse(BaseModel):
    status: str
    version: str
