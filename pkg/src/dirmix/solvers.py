"""Transductive solvers over one episode.

The primary solver alternates three block updates: per-class Dirichlet
parameters by closed-form majorize-minimize, query class proportions, and
query assignments by a softmax (or its hard argmax limit). The classical
mixture-model EM is implemented as an independent reference: with the
proportion weight equal to the query size and no support set, both produce
identical iterate sequences.

Baselines (hard/soft K-means, Gaussian EM with identity or diagonal
covariance, hard KL K-means) share the same outer structure, support-row
pinning, and stopping rule so that per-episode comparisons are like for
like.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    EPS_PI,
    ClassProportions,
    ContentKind,
    DirichletParams,
    FeatureSet,
    ObjectiveBreakdown,
    SoftAssignment,
    TaskInstance,
    barrier,
    clamped_log,
    log_density_matrix,
    objective,
    task_log_rows,
)
from .mle import WEIGHT_FLOOR, fit_dirichlet_all

__all__ = [
    "SolverConfig",
    "SolverResult",
    "METHOD_NAMES",
    "default_lambda",
    "update_assignments",
    "update_proportions",
    "em_dirichlet",
    "em_dirichlet_mixture_reference",
    "hard_kmeans",
    "soft_kmeans",
    "em_gaussian",
    "hard_kl_kmeans",
    "solve",
]

METHOD_NAMES = (
    "em-dirichlet",
    "hard-em-dirichlet",
    "hard-kmeans",
    "soft-kmeans",
    "em-gaussian-id",
    "em-gaussian-diag",
    "hard-kl-kmeans",
)


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    max_outer_iter: int = 1000
    outer_eps: float = 1e-13
    inner_eps: float = 1e-13
    inner_max_iter: int = 1000
    hard_assignments: bool = False
    use_barrier: bool = True
    use_mdl: bool = True
    stiffness: float = 1.0  # soft K-means responsibility sharpness
    variance_floor: float = 1e-6
    init_seed: int = 0  # seeding for raw-embedding centroid initialization

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if self.outer_eps <= 0.0 or self.inner_eps <= 0.0:
            raise ValueError("eps must be positive")

    @property
    def effective_lam(self) -> float:
        return self.lam if self.use_mdl else 0.0

    @property
    def hard(self) -> bool:
        # removing the entropic barrier turns the assignment subproblem into
        # a linear program over the simplex, whose solutions are vertices
        return self.hard_assignments or not self.use_barrier


def default_lambda(n_query: int, n_classes: int, k_eff: Optional[int] = None, scale: float = 1.0) -> float:
    """Proportion-penalty weight: (5/K)|Q| for zero-shot episodes and
    (k_eff/K)|Q| when a support set is available."""
    num = 5.0 if k_eff is None else float(k_eff)
    return scale * num * n_query / n_classes


@dataclass
class SolverResult:
    assignment: SoftAssignment
    alphas: Optional[DirichletParams]
    proportions: ClassProportions
    objective_trace: list[ObjectiveBreakdown]
    outer_iterations: int
    centroids: Optional[np.ndarray] = None
    variances: Optional[np.ndarray] = None
    mixture_loglik_trace: Optional[list[float]] = None
    iterate_history: Optional[list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = None


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _harden_rows(logits: np.ndarray) -> np.ndarray:
    out = np.zeros_like(logits)
    out[np.arange(logits.shape[0]), logits.argmax(axis=1)] = 1.0
    return out


def _initial_probability_assignment(features: FeatureSet, task: TaskInstance) -> np.ndarray:
    """Support rows pinned to labels; query rows start at the stored
    probability vectors (renormalized so rows sum to 1 exactly)."""
    if features.content_kind is not ContentKind.SIMPLEX_PROBABILITIES:
        raise ValueError("probability features required")
    q = np.maximum(features.rows[task.query_indices], 0.0)
    q = q / q.sum(axis=1, keepdims=True)
    return np.vstack([task.support_labels.reshape(task.n_support, task.n_classes), q])


def _initial_raw_assignment(features: FeatureSet, task: TaskInstance, config: SolverConfig) -> np.ndarray:
    """Raw embeddings carry no class-probability rows to start from, so seed
    K centroids greedily (farthest-point style, deterministic given
    init_seed) and start from the induced hard partition."""
    rows = features.rows[task.all_indices]
    k = task.n_classes
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.init_seed)))
    centroids = [rows[rng.integers(rows.shape[0])]]
    d2 = np.sum((rows - centroids[0]) ** 2, axis=1)
    for _ in range(1, k):
        centroids.append(rows[int(d2.argmax())])
        d2 = np.minimum(d2, np.sum((rows - centroids[-1]) ** 2, axis=1))
    centroids = np.stack(centroids)
    dists = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    u = _harden_rows(-dists)
    u[: task.n_support] = task.support_labels.reshape(task.n_support, task.n_classes)
    return u


def _initial_assignment(features: FeatureSet, task: TaskInstance, config: SolverConfig) -> np.ndarray:
    if features.content_kind is ContentKind.SIMPLEX_PROBABILITIES:
        return _initial_probability_assignment(features, task)
    return _initial_raw_assignment(features, task, config)


def _assignment_logits(logp_query: np.ndarray, pi: np.ndarray, config: SolverConfig, n_query: int) -> np.ndarray:
    logits = logp_query
    if config.effective_lam > 0.0:
        logits = logits + (config.effective_lam / n_query) * np.log(np.maximum(pi, EPS_PI))
    return logits


def _update_query_rows(u: np.ndarray, logits: np.ndarray, task: TaskInstance, hard: bool) -> np.ndarray:
    new = u.copy()
    new[task.n_support:] = _harden_rows(logits) if hard else _softmax_rows(logits)
    return new


def update_proportions(u: SoftAssignment, task: TaskInstance) -> ClassProportions:
    """Average assignment mass per class over the query rows."""
    if task.n_query == 0:
        raise ValueError("task has an empty query set")
    return ClassProportions(u.query_rows.mean(axis=0))


def update_assignments(
    features: FeatureSet,
    task: TaskInstance,
    alphas: DirichletParams,
    proportions: ClassProportions,
    config: SolverConfig,
) -> SoftAssignment:
    """One assignment update of the primary solver: query rows become the
    softmax of per-class log-density plus the weighted log-proportions
    (or its one-hot argmax in hard mode); support rows stay pinned."""
    log_rows = task_log_rows(features, task)
    logp = log_density_matrix(log_rows[task.n_support:], alphas.alphas)
    logits = _assignment_logits(logp, proportions.pi, config, task.n_query)
    u0 = np.vstack(
        [
            task.support_labels.reshape(task.n_support, task.n_classes),
            np.zeros((task.n_query, task.n_classes)),
        ]
    )
    u = _update_query_rows(u0, logits, task, config.hard)
    return SoftAssignment(u, n_support=task.n_support)


def _fit_all_alphas(alphas: np.ndarray, log_rows: np.ndarray, u: np.ndarray, config: SolverConfig) -> np.ndarray:
    return fit_dirichlet_all(
        alphas, log_rows, u, eps=config.inner_eps, max_iter=config.inner_max_iter
    )


def _relative_sq_change(new: np.ndarray, old: np.ndarray) -> float:
    delta = new - old
    return float((delta * delta).sum() / (old * old).sum())


def em_dirichlet(
    features: FeatureSet,
    task: TaskInstance,
    config: SolverConfig,
    record_iterates: bool = False,
) -> SolverResult:
    """Block-MM minimization of the episode objective with per-class
    Dirichlet densities. Hard variant: hard_assignments=True with
    use_barrier=False."""
    if features.content_kind is not ContentKind.SIMPLEX_PROBABILITIES:
        raise ValueError("the Dirichlet solver requires probability features")
    k = task.n_classes
    if features.dim != k:
        raise ValueError("feature dimension must equal the class count")
    log_rows = task_log_rows(features, task)
    u = _initial_assignment(features, task, config)
    alphas = np.ones((k, k))
    lam = config.effective_lam
    trace = [objective(SoftAssignment(u, task.n_support), DirichletParams(alphas), features, task, lam)]
    history = None
    if record_iterates:
        history = [(u.copy(), u[task.n_support:].mean(axis=0), alphas.copy())]
    # Hard assignments can settle into an objective-plateau limit cycle in
    # which the parameter criterion never fires; since the next state is a
    # function of the current hard assignment alone, a revisited assignment
    # proves a cycle and the loop can stop.
    seen_states = {u.tobytes()} if config.hard else None
    iterations = 0
    for _ in range(config.max_outer_iter):
        new_alphas = _fit_all_alphas(alphas, log_rows, u, config)
        pi = u[task.n_support:].mean(axis=0)
        logp = log_density_matrix(log_rows[task.n_support:], new_alphas)
        logits = _assignment_logits(logp, pi, config, task.n_query)
        u = _update_query_rows(u, logits, task, config.hard)
        iterations += 1
        rel = _relative_sq_change(new_alphas, alphas)
        alphas = new_alphas
        trace.append(
            objective(SoftAssignment(u, task.n_support), DirichletParams(alphas), features, task, lam)
        )
        if record_iterates:
            history.append((u.copy(), pi.copy(), alphas.copy()))
        if rel <= config.outer_eps:
            break
        if seen_states is not None:
            state = u.tobytes()
            if state in seen_states:
                break
            seen_states.add(state)
    assignment = SoftAssignment(u, n_support=task.n_support)
    return SolverResult(
        assignment=assignment,
        alphas=DirichletParams(alphas),
        proportions=update_proportions(assignment, task),
        objective_trace=trace,
        outer_iterations=iterations,
        iterate_history=history,
    )


def em_dirichlet_mixture_reference(
    features: FeatureSet,
    task: TaskInstance,
    alphas_init: np.ndarray,
    pi_init: Optional[np.ndarray] = None,
    u_init: Optional[np.ndarray] = None,
    max_iter: int = 1000,
    eps: float = 1e-13,
    inner_eps: float = 1e-13,
    inner_max_iter: int = 1000,
    record_iterates: bool = False,
) -> SolverResult:
    """Classical EM for the Dirichlet mixture over the query set.

    Each iteration first re-estimates mixture weights and per-class
    parameters from the current responsibilities, then recomputes the
    responsibilities. Starting from responsibilities (``u_init``) and the
    same parameter warm starts as the primary solver makes the two
    algorithms step-for-step comparable.
    """
    if not task.is_zero_shot:
        raise ValueError("the mixture reference handles unsupervised episodes only")
    if features.content_kind is not ContentKind.SIMPLEX_PROBABILITIES:
        raise ValueError("probability features required")
    k = task.n_classes
    alphas = np.asarray(alphas_init, dtype=np.float64).copy()
    if alphas.shape != (k, k):
        raise ValueError("alphas_init must be K x K")
    log_rows = task_log_rows(features, task)
    cfg = SolverConfig(lam=float(task.n_query), inner_eps=inner_eps, inner_max_iter=inner_max_iter)

    if u_init is not None:
        u = np.asarray(u_init, dtype=np.float64).copy()
    else:
        if pi_init is None:
            pi_init = np.full(k, 1.0 / k)
        logp = log_density_matrix(log_rows, alphas)
        u = _softmax_rows(logp + np.log(np.maximum(pi_init, EPS_PI)))

    def mixture_loglik(pi_vec: np.ndarray, alpha_mat: np.ndarray) -> float:
        logp = log_density_matrix(log_rows, alpha_mat)
        z = logp + np.log(np.maximum(pi_vec, EPS_PI))
        m = z.max(axis=1, keepdims=True)
        return float((m[:, 0] + np.log(np.exp(z - m).sum(axis=1))).sum())

    history = [(u.copy(), u.mean(axis=0), alphas.copy())] if record_iterates else None
    loglik_trace: list[float] = []
    trace: list[ObjectiveBreakdown] = []
    iterations = 0
    for _ in range(max_iter):
        new_alphas = _fit_all_alphas(alphas, log_rows, u, cfg)
        pi = u.mean(axis=0)
        logp = log_density_matrix(log_rows, new_alphas)
        u = _softmax_rows(logp + np.log(np.maximum(pi, EPS_PI)))
        iterations += 1
        rel = _relative_sq_change(new_alphas, alphas)
        alphas = new_alphas
        loglik_trace.append(mixture_loglik(pi, alphas))
        trace.append(
            objective(SoftAssignment(u, 0), DirichletParams(alphas), features, task, cfg.lam)
        )
        if record_iterates:
            history.append((u.copy(), pi.copy(), alphas.copy()))
        if rel <= eps:
            break
    assignment = SoftAssignment(u, n_support=0)
    return SolverResult(
        assignment=assignment,
        alphas=DirichletParams(alphas),
        proportions=update_proportions(assignment, task),
        objective_trace=trace,
        outer_iterations=iterations,
        mixture_loglik_trace=loglik_trace,
        iterate_history=history,
    )


def _weighted_means(rows: np.ndarray, u: np.ndarray, old: np.ndarray) -> np.ndarray:
    """Per-class weighted mean of rows; classes with no mass keep old means."""
    mass = u.sum(axis=0)
    means = old.copy()
    ok = mass >= WEIGHT_FLOOR
    means[ok] = (u[:, ok].T @ rows) / mass[ok, None]
    return means


def _baseline_trace_entry(
    data_term: float, u: np.ndarray, n_support: int, lam: float
) -> ObjectiveBreakdown:
    sa = SoftAssignment(u, n_support)
    pi = u[n_support:].mean(axis=0)
    mdl = float(-np.sum(np.where(pi > 0, pi * np.log(np.maximum(pi, EPS_PI)), 0.0)))
    return ObjectiveBreakdown(
        neg_log_likelihood=data_term, barrier=barrier(sa), mdl=mdl, lam=lam
    )


def _sq_dists(rows: np.ndarray, means: np.ndarray) -> np.ndarray:
    return ((rows[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)


def _finish(
    u: np.ndarray,
    task: TaskInstance,
    trace: list[ObjectiveBreakdown],
    iterations: int,
    centroids: Optional[np.ndarray] = None,
    variances: Optional[np.ndarray] = None,
) -> SolverResult:
    assignment = SoftAssignment(u, n_support=task.n_support)
    return SolverResult(
        assignment=assignment,
        alphas=None,
        proportions=update_proportions(assignment, task),
        objective_trace=trace,
        outer_iterations=iterations,
        centroids=centroids,
        variances=variances,
    )


def hard_kmeans(features: FeatureSet, task: TaskInstance, config: SolverConfig) -> SolverResult:
    """K-means with squared Euclidean distance and hard query assignments."""
    rows = features.rows[task.all_indices]
    u = _initial_assignment(features, task, config)
    means = np.full((task.n_classes, rows.shape[1]), rows.mean(axis=0))
    trace: list[ObjectiveBreakdown] = []
    seen_states = {u.tobytes()}
    iterations = 0
    for _ in range(config.max_outer_iter):
        new_means = _weighted_means(rows, u, means)
        d = _sq_dists(rows, new_means)
        u = _update_query_rows(u, -d[task.n_support:], task, hard=True)
        iterations += 1
        rel = _relative_sq_change(new_means, means)
        means = new_means
        trace.append(_baseline_trace_entry(float((u * d).sum()), u, task.n_support, 0.0))
        if rel <= config.outer_eps:
            break
        state = u.tobytes()
        if state in seen_states:
            break
        seen_states.add(state)
    return _finish(u, task, trace, iterations, centroids=means)


def soft_kmeans(features: FeatureSet, task: TaskInstance, config: SolverConfig) -> SolverResult:
    """Soft K-means: responsibilities proportional to exp(-stiffness * distance^2)."""
    rows = features.rows[task.all_indices]
    u = _initial_assignment(features, task, config)
    means = np.full((task.n_classes, rows.shape[1]), rows.mean(axis=0))
    trace: list[ObjectiveBreakdown] = []
    iterations = 0
    for _ in range(config.max_outer_iter):
        new_means = _weighted_means(rows, u, means)
        d = _sq_dists(rows, new_means)
        u = _update_query_rows(u, -config.stiffness * d[task.n_support:], task, hard=False)
        iterations += 1
        rel = _relative_sq_change(new_means, means)
        means = new_means
        trace.append(_baseline_trace_entry(float((u * d).sum()), u, task.n_support, 0.0))
        if rel <= config.outer_eps:
            break
    return _finish(u, task, trace, iterations, centroids=means)


def em_gaussian(
    features: FeatureSet,
    task: TaskInstance,
    config: SolverConfig,
    covariance: str = "identity",
) -> SolverResult:
    """Gaussian EM with the same proportion-penalty structure as the primary
    solver; covariance is the identity or a floored per-class diagonal."""
    if covariance not in ("identity", "diagonal"):
        raise ValueError("covariance must be 'identity' or 'diagonal'")
    rows = features.rows[task.all_indices]
    dim = rows.shape[1]
    u = _initial_assignment(features, task, config)
    means = np.full((task.n_classes, dim), rows.mean(axis=0))
    variances = np.ones((task.n_classes, dim))
    log2pi = np.log(2.0 * np.pi)
    trace: list[ObjectiveBreakdown] = []
    seen_states = {u.tobytes()} if config.hard else None
    iterations = 0
    for _ in range(config.max_outer_iter):
        new_means = _weighted_means(rows, u, means)
        if covariance == "diagonal":
            mass = u.sum(axis=0)
            ok = mass >= WEIGHT_FLOOR
            new_vars = variances.copy()
            # weighted variance around the new (weighted-mean) centers
            sq = (u[:, ok].T @ (rows * rows)) / mass[ok, None]
            new_vars[ok] = sq - new_means[ok] ** 2
            new_vars = np.maximum(new_vars, config.variance_floor)
            logp = -0.5 * (
                ((rows[:, None, :] - new_means[None, :, :]) ** 2 / new_vars[None, :, :]).sum(axis=2)
                + np.log(new_vars).sum(axis=1)[None, :]
                + dim * log2pi
            )
        else:
            new_vars = variances
            logp = -0.5 * (_sq_dists(rows, new_means) + dim * log2pi)
        pi = u[task.n_support:].mean(axis=0)
        logits = _assignment_logits(logp[task.n_support:], pi, config, task.n_query)
        u = _update_query_rows(u, logits, task, config.hard)
        iterations += 1
        if covariance == "diagonal":
            rel = max(
                _relative_sq_change(new_means, means),
                _relative_sq_change(new_vars, variances),
            )
        else:
            rel = _relative_sq_change(new_means, means)
        means, variances = new_means, new_vars
        trace.append(
            _baseline_trace_entry(float(-(u * logp).sum()), u, task.n_support, config.effective_lam)
        )
        if rel <= config.outer_eps:
            break
        if seen_states is not None:
            state = u.tobytes()
            if state in seen_states:
                break
            seen_states.add(state)
    return _finish(u, task, trace, iterations, centroids=means, variances=variances)


def hard_kl_kmeans(features: FeatureSet, task: TaskInstance, config: SolverConfig) -> SolverResult:
    """Hard clustering under KL(row || centroid); the weighted mean is the
    exact centroid minimizer of that divergence on the simplex."""
    if features.content_kind is not ContentKind.SIMPLEX_PROBABILITIES:
        raise ValueError("KL K-means requires probability features")
    rows = features.rows[task.all_indices]
    log_rows = clamped_log(rows)
    u = _initial_assignment(features, task, config)
    means = np.full((task.n_classes, rows.shape[1]), rows.mean(axis=0))
    trace: list[ObjectiveBreakdown] = []
    seen_states = {u.tobytes()}
    iterations = 0
    for _ in range(config.max_outer_iter):
        new_means = _weighted_means(rows, u, means)
        div = (rows * log_rows).sum(axis=1)[:, None] - rows @ clamped_log(new_means).T
        u = _update_query_rows(u, -div[task.n_support:], task, hard=True)
        iterations += 1
        rel = _relative_sq_change(new_means, means)
        means = new_means
        trace.append(_baseline_trace_entry(float((u * div).sum()), u, task.n_support, 0.0))
        if rel <= config.outer_eps:
            break
        state = u.tobytes()
        if state in seen_states:
            break
        seen_states.add(state)
    return _finish(u, task, trace, iterations, centroids=means)


def method_flags(method: str) -> dict:
    """Assignment-mode and objective-term flags implied by a method name."""
    table = {
        "em-dirichlet": dict(hard_assignments=False, use_barrier=True, use_mdl=True),
        "hard-em-dirichlet": dict(hard_assignments=True, use_barrier=False, use_mdl=True),
        "hard-kmeans": dict(hard_assignments=True, use_barrier=False, use_mdl=False),
        "soft-kmeans": dict(hard_assignments=False, use_barrier=True, use_mdl=False),
        "em-gaussian-id": dict(hard_assignments=False, use_barrier=True, use_mdl=True),
        "em-gaussian-diag": dict(hard_assignments=False, use_barrier=True, use_mdl=True),
        "hard-kl-kmeans": dict(hard_assignments=True, use_barrier=False, use_mdl=False),
    }
    if method not in table:
        raise ValueError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")
    return table[method]


def configure(method: str, config: SolverConfig, **overrides) -> SolverConfig:
    """Config with the method's implied flags applied, then explicit overrides."""
    flags = method_flags(method)
    flags.update(overrides)
    return dataclasses.replace(config, **flags)


def solve(method: str, features: FeatureSet, task: TaskInstance, config: SolverConfig) -> SolverResult:
    """Run one episode with the named method under an already-resolved config."""
    if method in ("em-dirichlet", "hard-em-dirichlet"):
        return em_dirichlet(features, task, config)
    if method == "hard-kmeans":
        return hard_kmeans(features, task, config)
    if method == "soft-kmeans":
        return soft_kmeans(features, task, config)
    if method == "em-gaussian-id":
        return em_gaussian(features, task, config, covariance="identity")
    if method == "em-gaussian-diag":
        return em_gaussian(features, task, config, covariance="diagonal")
    if method == "hard-kl-kmeans":
        return hard_kl_kmeans(features, task, config)
    raise ValueError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")
