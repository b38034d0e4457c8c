"""Weighted Dirichlet maximum likelihood.

Minimizes, for one class, the weighted negative log-likelihood

    F(alpha) = sum_n w_n [ -sum_i (alpha_i - 1) log z_{n,i}
                           + sum_i ln Gamma(alpha_i) - ln Gamma(sum_i alpha_i) ]

by majorize-minimize. The primary scheme bounds ln Gamma(1 + .) by a
quadratic, which makes every iteration a closed-form positive root of a
per-coordinate quadratic; the alternative scheme linearizes the concave
-ln Gamma(sum) term and needs a Newton digamma inversion per iteration
(Minka's fixed point), kept here for speed/quality comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .specfun import curvature, digamma, ln_gamma, shifted_values_and_curvature, trigamma

__all__ = [
    "EmptyClusterError",
    "WeightedSample",
    "MmReport",
    "weighted_neg_log_likelihood",
    "quadratic_majorant",
    "quadratic_step",
    "linearized_step",
    "fit_dirichlet",
    "fit_dirichlet_linearized",
    "inverse_digamma",
]

# Below this total assignment mass a cluster is treated as empty and its
# parameters are left untouched by the caller.
WEIGHT_FLOOR = 1e-12

# Concentration ceiling. A cluster whose weighted mass sits on (nearly) one
# point has no finite maximum likelihood (the density can concentrate
# without bound), so the fit is solved over (0, ALPHA_MAX]^K instead; the
# clamped root is the exact constrained minimizer of the per-coordinate
# surrogate. Counterpart of the variance floor in the Gaussian solvers.
ALPHA_MAX = 1e6

_EULER_GAMMA = 0.5772156649015328606


class EmptyClusterError(ValueError):
    """Raised when a fit is requested against (numerically) zero total weight."""


@dataclass(frozen=True)
class WeightedSample:
    """Clamped log-features plus one nonnegative weight per row."""

    log_rows: np.ndarray  # N x K
    weights: np.ndarray  # N

    def __post_init__(self):
        lr = np.asarray(self.log_rows, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if lr.ndim != 2 or w.shape != (lr.shape[0],):
            raise ValueError("log_rows must be N x K with one weight per row")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be nonnegative and finite")
        object.__setattr__(self, "log_rows", lr)
        object.__setattr__(self, "weights", w)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def weighted_log_sums(self) -> np.ndarray:
        """sum_n w_n log z_{n,i} per coordinate."""
        return self.weights @ self.log_rows


def _check_positive_vector(alpha, dim: int) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (dim,):
        raise ValueError(f"parameter vector must have length {dim}")
    if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
        raise ValueError("parameter vector must be strictly positive and finite")
    return a


@dataclass
class MmReport:
    iterations: int
    final_objective: float
    converged: bool
    trajectory: Optional[list[float]] = None


def weighted_neg_log_likelihood(alpha, sample: WeightedSample) -> float:
    """F(alpha) for one class."""
    a = _check_positive_vector(alpha, sample.log_rows.shape[1])
    total = sample.total_weight
    if total < WEIGHT_FLOOR:
        raise EmptyClusterError("total assignment mass is zero")
    return float(
        -np.dot(a - 1.0, sample.weighted_log_sums())
        + total * (np.sum(ln_gamma(a)) - ln_gamma(a.sum()))
    )


def quadratic_majorant(alpha, anchor, sample: WeightedSample) -> float:
    """Value at ``alpha`` of the quadratic tangent majorant of F built at ``anchor``.

    Dominates F everywhere and touches it at the anchor, which is what makes
    the closed-form iteration monotone.
    """
    dim = sample.log_rows.shape[1]
    a = _check_positive_vector(alpha, dim)
    b = _check_positive_vector(anchor, dim)
    total = sample.total_weight
    diff = a - b
    per_coord = (
        -np.log(a)
        + ln_gamma(b + 1.0)
        + digamma(b + 1.0) * diff
        + 0.5 * curvature(b) * diff * diff
    )
    tail = -ln_gamma(b.sum()) - diff.sum() * digamma(b.sum())
    return float(
        -np.dot(a - 1.0, sample.weighted_log_sums())
        + total * (per_coord.sum() + tail)
    )


def _quadratic_root(alpha: np.ndarray, mean_log: np.ndarray, row_sums: np.ndarray) -> np.ndarray:
    """Positive root of c x^2 + b x = 1 per coordinate, clamped to the
    concentration ceiling. ``alpha`` may be a vector or a stack of vectors
    with matching ``row_sums``."""
    _, phi_prime, c = shifted_values_and_curvature(alpha)
    b = phi_prime - digamma(row_sums) - c * alpha - mean_log
    disc = np.sqrt(b * b + 4.0 * c)
    # the two expressions are the same root; pick the cancellation-free one
    root = np.where(b > 0.0, 2.0 / (b + disc), (disc - b) / (2.0 * c))
    return np.minimum(root, ALPHA_MAX)


def quadratic_step(alpha, sample: WeightedSample) -> np.ndarray:
    """One closed-form update: per coordinate, the positive root of
    c x^2 + b x = 1 with the surrogate built at ``alpha``."""
    a = _check_positive_vector(alpha, sample.log_rows.shape[1])
    total = sample.total_weight
    if total < WEIGHT_FLOOR:
        raise EmptyClusterError("total assignment mass is zero")
    mean_log = sample.weighted_log_sums() / total
    return _quadratic_root(a, mean_log, a.sum())


def inverse_digamma(y, max_iter: int = 50, tol: float = 1e-13) -> np.ndarray:
    """Solve digamma(x) = y for x > 0 by Newton from the standard initializer."""
    y = np.asarray(y, dtype=np.float64)
    x = np.where(y >= -2.22, np.exp(y) + 0.5, -1.0 / (y + _EULER_GAMMA))
    x = np.maximum(x, 1e-300)
    for _ in range(max_iter):
        resid = digamma(x) - y
        if np.all(np.abs(resid) <= tol * np.maximum(1.0, np.abs(y))):
            return x
        step = resid / trigamma(x)
        x_next = x - step
        x = np.where(x_next > 0.0, x_next, x / 2.0)
    raise RuntimeError("digamma inversion did not converge")


def linearized_step(alpha, sample: WeightedSample) -> np.ndarray:
    """One update under the classic linearization of -ln Gamma(sum alpha):
    digamma(x_i) = digamma(sum_j alpha_j) + mean log z_i, inverted by Newton."""
    a = _check_positive_vector(alpha, sample.log_rows.shape[1])
    total = sample.total_weight
    if total < WEIGHT_FLOOR:
        raise EmptyClusterError("total assignment mass is zero")
    mean_log = sample.weighted_log_sums() / total
    return np.minimum(inverse_digamma(digamma(a.sum()) + mean_log), ALPHA_MAX)


def _capped_direction(mean_log: np.ndarray) -> np.ndarray | None:
    """Capped solution for (near-)degenerate weighted data, or None.

    A finite minimizer exists iff sum_i exp(mean_log_i) < 1 strictly (the
    statistics lie inside the image of the model's mean map; equality is
    the single-point case), and the minimizing total concentration scales
    like (K - 1) / (2 (1 - sum_i exp(mean_log_i))). When that scale reaches
    the ceiling, the minimizer over the capped domain is, to leading order,
    the ceiling times the limit direction exp(mean_log) (normalized).
    """
    p = np.exp(mean_log)
    total = p.sum()
    dim = mean_log.shape[0]
    if 1.0 - total > (dim - 1) / (2.0 * ALPHA_MAX):
        return None
    return ALPHA_MAX * (p / total)


def _fit(step, init, sample, eps, max_iter, record_trajectory):
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    alpha = _check_positive_vector(init, sample.log_rows.shape[1]).copy()
    total = sample.total_weight
    if total < WEIGHT_FLOOR:
        raise EmptyClusterError("total assignment mass is zero")
    trajectory = None
    if record_trajectory:
        trajectory = [weighted_neg_log_likelihood(alpha, sample)]
    capped = _capped_direction(sample.weighted_log_sums() / total)
    if capped is not None:
        if record_trajectory:
            trajectory.append(weighted_neg_log_likelihood(capped, sample))
        report = MmReport(
            iterations=0,
            final_objective=weighted_neg_log_likelihood(capped, sample),
            converged=True,
            trajectory=trajectory,
        )
        return capped, report
    converged = False
    iterations = 0
    for _ in range(max_iter):
        new = step(alpha, sample)
        iterations += 1
        delta = new - alpha
        rel = float(np.dot(delta, delta) / np.dot(alpha, alpha))
        alpha = new
        if record_trajectory:
            trajectory.append(weighted_neg_log_likelihood(alpha, sample))
        if rel <= eps:
            converged = True
            break
    report = MmReport(
        iterations=iterations,
        final_objective=weighted_neg_log_likelihood(alpha, sample),
        converged=converged,
        trajectory=trajectory,
    )
    return alpha, report


def fit_dirichlet(
    init,
    sample: WeightedSample,
    eps: float = 1e-13,
    max_iter: int = 1000,
    record_trajectory: bool = False,
) -> tuple[np.ndarray, MmReport]:
    """Iterate the closed-form update until the relative squared change of
    the parameter vector drops to ``eps`` or ``max_iter`` is hit."""
    return _fit(quadratic_step, init, sample, eps, max_iter, record_trajectory)


def fit_dirichlet_linearized(
    init,
    sample: WeightedSample,
    eps: float = 1e-13,
    max_iter: int = 1000,
    record_trajectory: bool = False,
) -> tuple[np.ndarray, MmReport]:
    """Same loop as fit_dirichlet but with the linearization-based update."""
    return _fit(linearized_step, init, sample, eps, max_iter, record_trajectory)


def fit_dirichlet_all(
    alphas: np.ndarray,
    log_rows: np.ndarray,
    weights: np.ndarray,
    eps: float = 1e-13,
    max_iter: int = 1000,
) -> np.ndarray:
    """Per-class fits for a whole assignment matrix, vectorized across classes.

    Runs the same iteration and per-class stopping rule as fit_dirichlet
    (classes are independent), skipping classes whose total assignment mass
    is below the empty-cluster floor; their rows are returned unchanged.
    """
    out = np.array(alphas, dtype=np.float64, copy=True)
    weights = np.asarray(weights, dtype=np.float64)
    mass = weights.sum(axis=0)
    active = np.flatnonzero(mass >= WEIGHT_FLOOR)
    if active.size == 0:
        return out
    mean_log = (weights[:, active].T @ log_rows) / mass[active, None]
    cur = out[active].copy()
    dim = log_rows.shape[1]
    exp_stats = np.exp(mean_log)
    deficits = 1.0 - exp_stats.sum(axis=1)
    degenerate = deficits <= (dim - 1) / (2.0 * ALPHA_MAX)
    if degenerate.any():
        cur[degenerate] = ALPHA_MAX * (
            exp_stats[degenerate] / exp_stats[degenerate].sum(axis=1, keepdims=True)
        )
    running = np.flatnonzero(~degenerate)
    for _ in range(max_iter):
        if running.size == 0:
            break
        sub = cur[running]
        new = _quadratic_root(sub, mean_log[running], sub.sum(axis=1)[:, None])
        delta = new - sub
        rel = (delta * delta).sum(axis=1) / (sub * sub).sum(axis=1)
        cur[running] = new
        running = running[rel > eps]
    out[active] = cur
    return out
