"""Domain types, the Dirichlet log-density, and the clustering objective.

The objective of one transductive episode is

    total = -loglik + barrier + lam * partition_complexity

evaluated on an assignment matrix whose support rows are pinned to the
one-hot labels and whose query rows live on the probability simplex.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .specfun import ln_gamma

# Probability entries are clamped at this floor before taking logs: softmax
# features can underflow to exact 0 where the Dirichlet log-density diverges.
EPS_Z = 1e-12

# Class proportions are clamped at this floor before taking logs in the
# assignment updates.
EPS_PI = 1e-12

SIMPLEX_ATOL = 1e-6


class ContentKind(enum.Enum):
    SIMPLEX_PROBABILITIES = "simplex_probabilities"
    RAW_EMBEDDINGS = "raw_embeddings"


def clamped_log(rows: np.ndarray) -> np.ndarray:
    """Elementwise log with entries floored at EPS_Z."""
    return np.log(np.maximum(rows, EPS_Z))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureSet:
    """N feature vectors, optionally labeled.

    For probability content each row lies on the unit simplex and the
    feature dimension equals the number of classes.
    """

    rows: np.ndarray
    content_kind: ContentKind
    labels: Optional[np.ndarray] = None
    class_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise ValueError("rows must be a nonempty N x D matrix")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows must be finite")
        if self.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
            if np.any(rows < -SIMPLEX_ATOL):
                raise ValueError("probability rows must be nonnegative")
            sums = rows.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > SIMPLEX_ATOL):
                bad = int(np.abs(sums - 1.0).argmax())
                raise ValueError(
                    f"probability row {bad} sums to {sums[bad]:.8f}, expected 1"
                )
        object.__setattr__(self, "rows", _freeze(rows))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (rows.shape[0],):
                raise ValueError("labels must have one entry per row")
            if labels.min() < 0 or labels.max() >= self.n_classes:
                raise ValueError("labels out of class range")
            object.__setattr__(self, "labels", _freeze(labels))
        if self.class_names is not None:
            names = tuple(self.class_names)
            if (
                self.content_kind is ContentKind.SIMPLEX_PROBABILITIES
                and len(names) != rows.shape[1]
            ):
                raise ValueError("class_names length must equal feature dimension")
            object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def n_classes(self) -> int:
        if self.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
            return self.dim
        if self.class_names is not None:
            return len(self.class_names)
        if self.labels is not None:
            return int(np.asarray(self.labels).max()) + 1
        raise ValueError("raw feature set without labels or class names has no class count")


@dataclass(frozen=True)
class TaskInstance:
    """One sampled episode: pinned support rows plus query rows to classify.

    Assignment matrices over a task follow the row order
    [support..., query...] given by ``all_indices``.
    """

    query_indices: np.ndarray
    support_indices: np.ndarray
    support_labels: np.ndarray  # |S| x K one-hot
    n_classes: int

    def __post_init__(self):
        q = np.asarray(self.query_indices, dtype=np.int64)
        s = np.asarray(self.support_indices, dtype=np.int64)
        y = np.asarray(self.support_labels, dtype=np.float64)
        if q.size < 1:
            raise ValueError("query set must be nonempty")
        if np.intersect1d(q, s).size:
            raise ValueError("support and query sets must be disjoint")
        if y.shape != (s.size, self.n_classes):
            raise ValueError("support_labels must be |S| x K")
        if s.size and not (
            np.all((y == 0.0) | (y == 1.0)) and np.all(y.sum(axis=1) == 1.0)
        ):
            raise ValueError("support labels must be exactly one-hot")
        object.__setattr__(self, "query_indices", _freeze(q))
        object.__setattr__(self, "support_indices", _freeze(s))
        object.__setattr__(self, "support_labels", _freeze(y))

    @property
    def n_support(self) -> int:
        return self.support_indices.size

    @property
    def n_query(self) -> int:
        return self.query_indices.size

    @property
    def n_rows(self) -> int:
        return self.n_support + self.n_query

    @property
    def all_indices(self) -> np.ndarray:
        return np.concatenate([self.support_indices, self.query_indices])

    @property
    def is_zero_shot(self) -> bool:
        return self.n_support == 0


@dataclass(frozen=True)
class DirichletParams:
    """One positive parameter vector per class, stacked row-wise."""

    alphas: np.ndarray  # K x K

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("alphas must be a K x K matrix")
        if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
            raise ValueError("alphas must be strictly positive and finite")
        object.__setattr__(self, "alphas", _freeze(a))

    @property
    def n_classes(self) -> int:
        return self.alphas.shape[0]


@dataclass(frozen=True)
class SoftAssignment:
    """Row-stochastic N x K matrix over one task's rows (support first)."""

    matrix: np.ndarray
    n_support: int = 0

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=np.float64)
        if u.ndim != 2:
            raise ValueError("assignment must be an N x K matrix")
        if np.any(u < 0.0):
            raise ValueError("assignment entries must be nonnegative")
        if np.any(np.abs(u.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("assignment rows must sum to 1")
        if not 0 <= self.n_support <= u.shape[0]:
            raise ValueError("n_support out of range")
        object.__setattr__(self, "matrix", _freeze(u))

    @property
    def query_rows(self) -> np.ndarray:
        return self.matrix[self.n_support:]

    @property
    def support_rows(self) -> np.ndarray:
        return self.matrix[: self.n_support]


@dataclass(frozen=True)
class ClassProportions:
    """Average query assignment mass per class; a point of the simplex."""

    pi: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pi, dtype=np.float64)
        if p.ndim != 1 or np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must be a simplex vector")
        object.__setattr__(self, "pi", _freeze(p))


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """One iterate's objective value split into its three terms."""

    neg_log_likelihood: float
    barrier: float
    mdl: float
    lam: float
    total: float = field(default=np.nan)

    def __post_init__(self):
        object.__setattr__(
            self,
            "total",
            self.neg_log_likelihood + self.barrier + self.lam * self.mdl,
        )


def dirichlet_log_density(z: Sequence[float], alpha: Sequence[float]) -> float:
    """Log-density of a Dirichlet with parameters ``alpha`` at simplex point ``z``."""
    z = np.asarray(z, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if z.shape != alpha.shape or z.ndim != 1:
        raise ValueError("z and alpha must be vectors of the same length")
    if np.any(alpha <= 0.0) or not np.all(np.isfinite(alpha)):
        raise ValueError("alpha must be strictly positive and finite")
    if np.any(z < -SIMPLEX_ATOL) or abs(z.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValueError("z must lie on the simplex")
    return float(
        np.dot(alpha - 1.0, clamped_log(z))
        - np.sum(ln_gamma(alpha))
        + ln_gamma(alpha.sum())
    )


def log_density_matrix(log_rows: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """N x K matrix of per-class log-densities from pre-clamped log features."""
    alphas = np.asarray(alphas, dtype=np.float64)
    norm = ln_gamma(alphas.sum(axis=1)) - ln_gamma(alphas).sum(axis=1)
    return log_rows @ (alphas - 1.0).T + norm


def task_log_rows(features: FeatureSet, task: TaskInstance) -> np.ndarray:
    """Clamped log feature rows of a task, in [support..., query...] order."""
    return clamped_log(features.rows[task.all_indices])


def log_likelihood(
    u: SoftAssignment,
    params: DirichletParams,
    features: FeatureSet,
    task: TaskInstance,
) -> float:
    """Assignment-weighted total log-density over all task rows."""
    if u.matrix.shape != (task.n_rows, task.n_classes):
        raise ValueError("assignment shape does not match task")
    if params.alphas.shape[0] != task.n_classes:
        raise ValueError("one parameter vector per class required")
    logp = log_density_matrix(task_log_rows(features, task), params.alphas)
    return float(np.sum(u.matrix * logp))


def barrier(u: SoftAssignment) -> float:
    """Entropic barrier over all assignment rows; 0 log 0 taken as 0."""
    m = u.matrix
    return float(np.sum(np.where(m > 0.0, m * np.log(np.maximum(m, EPS_Z)), 0.0)))


def partition_complexity(
    u: SoftAssignment, task: TaskInstance
) -> tuple[float, ClassProportions]:
    """Entropy of the query class proportions plus the proportions themselves."""
    if task.n_query == 0:
        raise ValueError("task has an empty query set")
    q = u.query_rows
    if q.shape[0] != task.n_query:
        raise ValueError("assignment rows do not match the task query set")
    pi = q.mean(axis=0)
    psi_val = float(-np.sum(np.where(pi > 0.0, pi * np.log(np.maximum(pi, EPS_Z)), 0.0)))
    return psi_val, ClassProportions(pi)


def objective(
    u: SoftAssignment,
    params: DirichletParams,
    features: FeatureSet,
    task: TaskInstance,
    lam: float,
) -> ObjectiveBreakdown:
    """Full episode objective, split per term."""
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    neg_ll = -log_likelihood(u, params, features, task)
    phi = barrier(u)
    psi_val, _ = partition_complexity(u, task)
    return ObjectiveBreakdown(neg_log_likelihood=neg_ll, barrier=phi, mdl=psi_val, lam=lam)
