"""Cluster-to-class assignment for zero-shot evaluation.

After clustering, each nonempty cluster is summarized by the mean of its
member probability vectors; entry (k, l) of that profile is read as the
affinity of cluster k for class l. Clusters are then mapped to distinct
classes by maximizing total affinity (rectangular assignment), or, as a
deliberately naive variant, by a per-cluster argmax that may collide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ContentKind, FeatureSet, SoftAssignment, TaskInstance

__all__ = ["ClusterProfile", "ClusterClassMap", "cluster_profiles", "match_clusters", "argmax_assignment"]


@dataclass(frozen=True)
class ClusterProfile:
    """Mean feature vector of every nonempty cluster."""

    cluster_ids: np.ndarray  # sorted ids of nonempty clusters
    means: np.ndarray  # len(cluster_ids) x K

    def __post_init__(self):
        ids = np.asarray(self.cluster_ids, dtype=np.int64)
        means = np.asarray(self.means, dtype=np.float64)
        if ids.size == 0:
            raise ValueError("at least one nonempty cluster required")
        if means.shape[0] != ids.size:
            raise ValueError("one mean row per cluster required")
        object.__setattr__(self, "cluster_ids", ids)
        object.__setattr__(self, "means", means)


@dataclass(frozen=True)
class ClusterClassMap:
    """Partial map from cluster id to class id."""

    mapping: dict[int, int]

    def is_injective(self) -> bool:
        values = list(self.mapping.values())
        return len(values) == len(set(values))


def hard_clusters(assignment: SoftAssignment) -> np.ndarray:
    """Cluster id per query row: the argmax of the assignment row
    (lowest index on ties)."""
    return assignment.query_rows.argmax(axis=1)


def cluster_profiles(
    features: FeatureSet, task: TaskInstance, assignment: SoftAssignment
) -> ClusterProfile:
    """Mean query feature per nonempty hard cluster."""
    if features.content_kind is not ContentKind.SIMPLEX_PROBABILITIES:
        raise ValueError("cluster profiles require probability features")
    if assignment.matrix.shape != (task.n_rows, task.n_classes):
        raise ValueError("assignment shape does not match task")
    members = hard_clusters(assignment)
    rows = features.rows[task.query_indices]
    ids = np.unique(members)
    means = np.stack([rows[members == k].mean(axis=0) for k in ids])
    return ClusterProfile(cluster_ids=ids, means=means)


def match_clusters(profile: ClusterProfile) -> ClusterClassMap:
    """Injective cluster-to-class map maximizing total profile affinity.

    Solved as a rectangular linear assignment (each cluster gets exactly one
    class, each class is used at most once), which requires no more clusters
    than classes.
    """
    profit = profile.means
    if not np.all(np.isfinite(profit)):
        raise ValueError("profile contains non-finite affinities")
    n_clusters, n_classes = profit.shape
    if n_clusters > n_classes:
        raise ValueError("more clusters than classes; injective map impossible")
    rows, cols = linear_sum_assignment(profit, maximize=True)
    return ClusterClassMap(
        mapping={int(profile.cluster_ids[r]): int(c) for r, c in zip(rows, cols)}
    )


def argmax_assignment(profile: ClusterProfile) -> ClusterClassMap:
    """Per-cluster argmax of the profile; collisions between clusters allowed."""
    best = profile.means.argmax(axis=1)
    return ClusterClassMap(
        mapping={int(k): int(c) for k, c in zip(profile.cluster_ids, best)}
    )
