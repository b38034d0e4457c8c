"""FastAPI service exposing the toolkit.

Every response carries ``resolved_config``, the fully-resolved settings of
the run, so any result can be replayed from its response alone. Containers
are referenced by filesystem path: the service is a local job runner, not
an upload endpoint.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__
from .container import ContainerFormatError, Manifest, manifest_path, inspect_container, read_container, write_container
from .core import clamped_log
from .mle import WeightedSample, fit_dirichlet, fit_dirichlet_linearized
from .schemas import (
    ClusterRequest,
    FewshotRequest,
    FitRequest,
    FitResponse,
    HealthResponse,
    InspectRequest,
    ReportResponse,
    SweepPoint,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
)
from .tasks import (
    FewShotProtocol,
    ZeroShotProtocol,
    generate_synthetic_mixture,
    run_benchmark,
    run_sweep,
    write_report_csv,
    write_report_json,
)

app = FastAPI(
    title="dirmix",
    version=__version__,
    description="Transductive simplex classification with Dirichlet mixtures",
)


def parse_alpha_spec(text: str) -> np.ndarray:
    """Parse 'a,b,c;d,e,f;...' into a positive K x D matrix."""
    try:
        rows = [
            [float(v) for v in row.split(",")]
            for row in text.strip().split(";")
            if row.strip()
        ]
        mat = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"bad alpha spec {text!r}: {exc}") from exc
    if mat.ndim != 2 or len({len(r) for r in rows}) != 1:
        raise ValueError("alpha spec rows must all have the same length")
    if np.any(mat <= 0) or not np.all(np.isfinite(mat)):
        raise ValueError("alpha spec entries must be strictly positive")
    return mat


def parse_vector(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.split(",")], dtype=np.float64)


@contextmanager
def _api_errors():
    try:
        yield
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (ValueError, ContainerFormatError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    with _api_errors():
        alphas = parse_alpha_spec(req.alpha)
        if alphas.shape[0] != req.classes:
            raise ValueError(
                f"alpha spec has {alphas.shape[0]} rows for {req.classes} classes"
            )
        proportions = parse_vector(req.proportions) if req.proportions else None
        features = generate_synthetic_mixture(alphas, proportions, req.n, req.seed)
        manifest = Manifest(
            dataset=req.dataset_name,
            class_names=list(features.class_names),
            temperature=None,
            encoder="synthetic-dirichlet-mixture",
        )
        write_container(features, manifest, req.out, dtype=req.dtype)
        hist = np.bincount(features.labels, minlength=features.n_classes)
    return SynthResponse(
        out=req.out,
        manifest=str(manifest_path(req.out)),
        n_samples=features.n_samples,
        dim=features.dim,
        label_histogram=hist.tolist(),
        resolved_config=req.model_dump(),
    )


def _report_response(req, report, out_prefix) -> ReportResponse:
    csv_path = json_path = None
    if out_prefix:
        csv_path = f"{out_prefix}.csv"
        json_path = f"{out_prefix}.json"
        write_report_csv(report, csv_path)
        write_report_json(report, json_path)
    return ReportResponse(
        method=report.method_name,
        mean_accuracy=report.mean_accuracy,
        mean_task_seconds=report.mean_task_seconds,
        n_tasks=len(report.per_task_accuracies),
        per_task_accuracies=report.per_task_accuracies,
        csv_path=csv_path,
        json_path=json_path,
        resolved_config={**req.model_dump(), **report.config_echo},
    )


def _solver_overrides(req) -> dict:
    overrides = {}
    if req.no_barrier:
        overrides.update(use_barrier=False, hard_assignments=True)
    if req.no_mdl:
        overrides.update(use_mdl=False)
    return overrides


@app.post("/cluster", response_model=ReportResponse)
def cluster(req: ClusterRequest) -> ReportResponse:
    with _api_errors():
        features, _ = read_container(req.container)
        protocol = ZeroShotProtocol(
            query_size=req.query_size,
            min_eff_classes=req.min_classes,
            max_eff_classes=req.max_classes,
            n_tasks=req.n_tasks,
            seed=req.seed,
        )
        report = run_benchmark(
            features,
            protocol,
            req.method,
            evaluation="matched" if req.matching else "argmax_only",
            lambda_scale=req.lambda_scale,
            overrides=_solver_overrides(req),
            workers=req.workers,
        )
    return _report_response(req, report, req.out)


@app.post("/fewshot", response_model=ReportResponse)
def fewshot(req: FewshotRequest) -> ReportResponse:
    with _api_errors():
        features, _ = read_container(req.container)
        if req.k_eff > features.n_classes:
            raise ValueError(
                f"k_eff {req.k_eff} exceeds the container's {features.n_classes} classes"
            )
        protocol = FewShotProtocol(
            shots=req.shots,
            k_eff=req.k_eff,
            query_size=req.query_size,
            n_tasks=req.n_tasks,
            seed=req.seed,
        )
        report = run_benchmark(
            features,
            protocol,
            req.method,
            lambda_scale=req.lambda_scale,
            overrides=_solver_overrides(req),
            workers=req.workers,
        )
    return _report_response(req, report, req.out)


@app.post("/fit-dirichlet", response_model=FitResponse)
def fit(req: FitRequest) -> FitResponse:
    with _api_errors():
        features, _ = read_container(req.container)
        sample = WeightedSample(clamped_log(features.rows), np.ones(features.n_samples))
        init = parse_vector(req.init) if req.init else np.ones(features.dim)
        fitter = fit_dirichlet if req.algo == "quadratic" else fit_dirichlet_linearized
        start = time.perf_counter()
        alpha, mm_report = fitter(init, sample, eps=req.eps, max_iter=req.max_iter)
        seconds = time.perf_counter() - start
    return FitResponse(
        algo=req.algo,
        alpha=alpha.tolist(),
        iterations=mm_report.iterations,
        converged=mm_report.converged,
        final_objective=mm_report.final_objective,
        seconds=seconds,
        resolved_config={**req.model_dump(), "init": init.tolist()},
    )


@app.post("/benchmark", response_model=SweepResponse)
def benchmark(req: SweepRequest) -> SweepResponse:
    with _api_errors():
        features, _ = read_container(req.container)
        if req.sweep == "query-size":
            protocol = ZeroShotProtocol(
                query_size=req.query_size,
                min_eff_classes=req.min_classes,
                max_eff_classes=req.max_classes,
                n_tasks=req.n_tasks,
                seed=req.seed,
            )
            sweep_field = "query_size"
            evaluation = "matched" if req.matching else "argmax_only"
        else:
            protocol = FewShotProtocol(
                shots=req.shots,
                k_eff=req.k_eff,
                query_size=req.query_size,
                n_tasks=req.n_tasks,
                seed=req.seed,
            )
            sweep_field = "shots"
            evaluation = "matched"
        reports = run_sweep(
            features,
            protocol,
            req.method,
            sweep_field,
            req.values,
            evaluation=evaluation,
            lambda_scale=req.lambda_scale,
            overrides=_solver_overrides(req),
            workers=req.workers,
        )
        csv_path = json_path = None
        if req.out:
            csv_path = f"{req.out}.csv"
            json_path = f"{req.out}.json"
            write_report_csv(reports, csv_path)
            write_report_json(reports, json_path)
    return SweepResponse(
        method=req.method,
        sweep=req.sweep,
        points=[
            SweepPoint(
                value=v,
                mean_accuracy=r.mean_accuracy,
                mean_task_seconds=r.mean_task_seconds,
            )
            for v, r in zip(req.values, reports)
        ],
        csv_path=csv_path,
        json_path=json_path,
        resolved_config=req.model_dump(),
    )


@app.post("/inspect")
def inspect(req: InspectRequest) -> dict:
    with _api_errors():
        return inspect_container(req.container)
