"""Episode sampling, synthetic data, evaluation, and the benchmark loop.

Episodes are reproducible across machines: task ``i`` of a run draws from
``numpy.random.Generator(Philox(SeedSequence((seed, i))))``, so a (seed,
protocol, task_index) triple always yields the same task.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ContentKind, FeatureSet, TaskInstance
from .matching import argmax_assignment, cluster_profiles, hard_clusters, match_clusters
from .solvers import SolverConfig, SolverResult, configure, default_lambda, solve

__all__ = [
    "ZeroShotProtocol",
    "FewShotProtocol",
    "BenchmarkReport",
    "task_rng",
    "sample_zero_shot_task",
    "sample_few_shot_task",
    "generate_synthetic_mixture",
    "evaluate_task",
    "run_benchmark",
    "run_sweep",
    "write_report_csv",
    "write_report_json",
]

_RESAMPLE_LIMIT = 100


@dataclass(frozen=True)
class ZeroShotProtocol:
    """Unsupervised episodes: a query batch drawn from a random subset of
    classes whose count is uniform on [min_eff_classes, max_eff_classes]
    (capped at the dataset's class count)."""

    query_size: int = 75
    min_eff_classes: int = 3
    max_eff_classes: int = 10
    n_tasks: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.query_size < 1:
            raise ValueError("query_size must be at least 1")
        if not 1 <= self.min_eff_classes <= self.max_eff_classes:
            raise ValueError("need 1 <= min_eff_classes <= max_eff_classes")
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be at least 1")

    @property
    def shots(self) -> int:
        return 0


@dataclass(frozen=True)
class FewShotProtocol:
    """Supervised episodes: ``shots`` labeled samples from every class plus
    a query batch drawn from ``k_eff`` randomly chosen classes."""

    shots: int = 4
    k_eff: int = 5
    query_size: int = 75
    n_tasks: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.shots < 0:
            raise ValueError("shots must be nonnegative")
        if self.k_eff < 1:
            raise ValueError("k_eff must be at least 1")
        if self.query_size < 1:
            raise ValueError("query_size must be at least 1")
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be at least 1")


def task_rng(seed: int, task_index: int) -> np.random.Generator:
    """The documented per-task stream: Philox keyed by (seed, task_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, task_index))))


def _require_labels(features: FeatureSet) -> np.ndarray:
    if features.labels is None:
        raise ValueError("labeled features required for episode sampling")
    return features.labels


def sample_zero_shot_task(
    features: FeatureSet, protocol: ZeroShotProtocol, task_index: int
) -> TaskInstance:
    labels = _require_labels(features)
    k = features.n_classes
    if protocol.min_eff_classes > k:
        raise ValueError("min_eff_classes exceeds the dataset class count")
    max_eff = min(protocol.max_eff_classes, k)
    rng = task_rng(protocol.seed, task_index)
    for _ in range(_RESAMPLE_LIMIT):
        n_eff = int(rng.integers(protocol.min_eff_classes, max_eff + 1))
        chosen = rng.choice(k, size=n_eff, replace=False)
        pool = np.flatnonzero(np.isin(labels, chosen))
        counts = np.bincount(labels[pool], minlength=k)[chosen]
        if np.any(counts == 0) or pool.size < protocol.query_size:
            continue
        query = np.sort(rng.choice(pool, size=protocol.query_size, replace=False))
        return TaskInstance(
            query_indices=query,
            support_indices=np.array([], dtype=np.int64),
            support_labels=np.zeros((0, k)),
            n_classes=k,
        )
    raise ValueError(
        f"could not draw a feasible class subset after {_RESAMPLE_LIMIT} attempts"
    )


def sample_few_shot_task(
    features: FeatureSet, protocol: FewShotProtocol, task_index: int
) -> TaskInstance:
    labels = _require_labels(features)
    k = features.n_classes
    if protocol.k_eff > k:
        raise ValueError("k_eff exceeds the dataset class count")
    rng = task_rng(protocol.seed, task_index)

    support_parts = []
    for c in range(k):
        avail = np.flatnonzero(labels == c)
        if avail.size < protocol.shots:
            raise ValueError(
                f"class {c} has {avail.size} samples, fewer than {protocol.shots} shots"
            )
        if protocol.shots:
            support_parts.append(rng.choice(avail, size=protocol.shots, replace=False))
    support = (
        np.sort(np.concatenate(support_parts))
        if support_parts
        else np.array([], dtype=np.int64)
    )

    chosen = rng.choice(k, size=protocol.k_eff, replace=False)
    pool = np.flatnonzero(np.isin(labels, chosen))
    pool = np.setdiff1d(pool, support)
    if pool.size < protocol.query_size:
        raise ValueError(
            f"classes {sorted(int(c) for c in chosen)} leave only {pool.size} query "
            f"candidates, need {protocol.query_size}"
        )
    query = np.sort(rng.choice(pool, size=protocol.query_size, replace=False))

    one_hot = np.zeros((support.size, k))
    if support.size:
        one_hot[np.arange(support.size), labels[support]] = 1.0
    return TaskInstance(
        query_indices=query,
        support_indices=support,
        support_labels=one_hot,
        n_classes=k,
    )


def generate_synthetic_mixture(
    alphas_true: np.ndarray,
    proportions_true: Optional[np.ndarray],
    n: int,
    seed: int,
) -> FeatureSet:
    """Labeled simplex features from a mixture of Dirichlet components."""
    alphas = np.asarray(alphas_true, dtype=np.float64)
    if alphas.ndim != 2 or np.any(alphas <= 0) or not np.all(np.isfinite(alphas)):
        raise ValueError("alphas_true must be a positive K x D matrix")
    k = alphas.shape[0]
    if proportions_true is None:
        proportions_true = np.full(k, 1.0 / k)
    pi = np.asarray(proportions_true, dtype=np.float64)
    if pi.shape != (k,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("proportions_true must be a length-K simplex vector")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = task_rng(seed, 0)
    labels = rng.choice(k, size=n, p=pi)
    rows = np.empty((n, alphas.shape[1]))
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.size:
            rows[members] = rng.dirichlet(alphas[c], size=members.size)
    # guard against exact zeros from extreme draws breaking simplex checks
    rows = np.maximum(rows, 0.0)
    rows /= rows.sum(axis=1, keepdims=True)
    return FeatureSet(
        rows=rows,
        content_kind=ContentKind.SIMPLEX_PROBABILITIES,
        labels=labels,
        class_names=tuple(f"class_{i}" for i in range(alphas.shape[1])),
    )


def _contingency_map(clusters: np.ndarray, truth: np.ndarray, k: int) -> dict[int, int]:
    """Injective cluster-to-class map maximizing matched counts.

    Stand-in for profile matching when features are raw embeddings, where
    cluster means are not class-affinity profiles."""
    ids = np.unique(clusters)
    counts = np.zeros((ids.size, k))
    for r, cid in enumerate(ids):
        counts[r] = np.bincount(truth[clusters == cid], minlength=k)
    rows_idx, cols_idx = linear_sum_assignment(counts, maximize=True)
    return {int(ids[r]): int(c) for r, c in zip(rows_idx, cols_idx)}


def evaluate_task(
    result: SolverResult,
    features: FeatureSet,
    task: TaskInstance,
    mode: str = "matched",
) -> float:
    """Query accuracy under one of three prediction rules.

    matched: hard-cluster the query rows, map clusters to classes
    injectively, score. argmax_only: same but per-cluster argmax of the
    profile, collisions allowed. supervised: row argmax of the assignment
    (class identities already aligned through the support set).
    """
    truth = _require_labels(features)[task.query_indices]
    if mode == "supervised":
        pred = result.assignment.query_rows.argmax(axis=1)
        return float((pred == truth).mean())
    clusters = hard_clusters(result.assignment)
    if mode == "matched":
        if features.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
            mapping = match_clusters(cluster_profiles(features, task, result.assignment)).mapping
        else:
            mapping = _contingency_map(clusters, truth, task.n_classes)
    elif mode == "argmax_only":
        mapping = argmax_assignment(cluster_profiles(features, task, result.assignment)).mapping
    else:
        raise ValueError("mode must be 'matched', 'argmax_only', or 'supervised'")
    pred = np.array([mapping[int(c)] for c in clusters])
    return float((pred == truth).mean())


@dataclass
class BenchmarkReport:
    method_name: str
    mean_accuracy: float
    per_task_accuracies: list[float]
    mean_task_seconds: float
    config_echo: dict
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method_name": self.method_name,
            "mean_accuracy": self.mean_accuracy,
            "per_task_accuracies": self.per_task_accuracies,
            "mean_task_seconds": self.mean_task_seconds,
            "config_echo": self.config_echo,
            "rows": self.rows,
        }


def _episode(features, protocol, method, config, evaluation, task_index) -> dict:
    try:
        if isinstance(protocol, ZeroShotProtocol):
            task = sample_zero_shot_task(features, protocol, task_index)
            mode = evaluation
            shots = 0
            k_eff = int(np.unique(features.labels[task.query_indices]).size)
        else:
            task = sample_few_shot_task(features, protocol, task_index)
            mode = "supervised"
            shots = protocol.shots
            k_eff = protocol.k_eff
        start = time.perf_counter()
        result = solve(method, features, task, config)
        seconds = time.perf_counter() - start
        accuracy = evaluate_task(result, features, task, mode)
    except Exception as exc:
        raise RuntimeError(
            f"task {task_index} (seed {protocol.seed}) failed: {exc}"
        ) from exc
    return {
        "task_index": task_index,
        "seed": protocol.seed,
        "method": method,
        "accuracy": accuracy,
        "seconds": seconds,
        "query_size": protocol.query_size,
        "shots": shots,
        "k_eff": k_eff,
        "lambda": config.effective_lam,
    }


def resolve_config(
    features: FeatureSet,
    protocol,
    method: str,
    lambda_scale: float = 1.0,
    overrides: Optional[dict] = None,
) -> SolverConfig:
    """Method-specific solver configuration with the protocol's
    proportion-penalty weight."""
    k_eff = protocol.k_eff if isinstance(protocol, FewShotProtocol) else None
    lam = default_lambda(protocol.query_size, features.n_classes, k_eff=k_eff, scale=lambda_scale)
    return configure(method, SolverConfig(lam=lam), **(overrides or {}))


def run_benchmark(
    features: FeatureSet,
    protocol,
    method: str,
    config: Optional[SolverConfig] = None,
    evaluation: str = "matched",
    lambda_scale: float = 1.0,
    overrides: Optional[dict] = None,
    workers: int = 1,
) -> BenchmarkReport:
    """Run ``protocol.n_tasks`` independent episodes and aggregate accuracy
    and per-episode solver wall time."""
    if config is None:
        config = resolve_config(features, protocol, method, lambda_scale, overrides)
    indices = list(range(protocol.n_tasks))
    if workers > 1:
        import multiprocessing

        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            rows = list(
                pool.map(
                    _episode_star,
                    [(features, protocol, method, config, evaluation, i) for i in indices],
                    chunksize=max(1, len(indices) // (4 * workers)),
                )
            )
    else:
        rows = [_episode(features, protocol, method, config, evaluation, i) for i in indices]
    accuracies = [r["accuracy"] for r in rows]
    return BenchmarkReport(
        method_name=method,
        mean_accuracy=float(np.mean(accuracies)),
        per_task_accuracies=accuracies,
        mean_task_seconds=float(np.mean([r["seconds"] for r in rows])),
        config_echo={
            "protocol": dataclasses.asdict(protocol),
            "protocol_kind": type(protocol).__name__,
            "solver": dataclasses.asdict(config),
            "evaluation": "supervised" if isinstance(protocol, FewShotProtocol) else evaluation,
            "lambda_scale": lambda_scale,
            "workers": workers,
        },
        rows=rows,
    )


def _episode_star(args):
    return _episode(*args)


def run_sweep(
    features: FeatureSet,
    protocol,
    method: str,
    sweep_field: str,
    values: Sequence[int],
    **kwargs,
) -> list[BenchmarkReport]:
    """One benchmark per value of a protocol field (e.g. query_size, shots)."""
    reports = []
    for v in values:
        p = dataclasses.replace(protocol, **{sweep_field: int(v)})
        reports.append(run_benchmark(features, p, method, **kwargs))
    return reports


_CSV_COLUMNS = [
    "task_index",
    "seed",
    "method",
    "accuracy",
    "seconds",
    "query_size",
    "shots",
    "k_eff",
    "lambda",
]


def write_report_csv(reports, path) -> None:
    if isinstance(reports, BenchmarkReport):
        reports = [reports]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for report in reports:
            for row in report.rows:
                writer.writerow({k: row[k] for k in _CSV_COLUMNS})


def write_report_json(reports, path) -> None:
    if isinstance(reports, BenchmarkReport):
        payload = reports.to_dict()
    else:
        payload = [r.to_dict() for r in reports]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
