"""Lloyd-style k-means building blocks: seeding, assignment, updates."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from .types import ClusterState, DimensionError, RngState, RunReport, as_points

logger = logging.getLogger(__name__)

_CHUNK = 4096


def kmeanspp_indices(points: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    """Return the row indices chosen by k-means++ D^2 seeding.

    The first index is uniform; each later one is drawn with probability
    proportional to the squared distance to the nearest chosen point.
    """
    points = as_points(points)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(points, axis=0).shape[0]
    if k > distinct:
        raise ValueError(f"k={k} exceeds the number of distinct points ({distinct})")

    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        cdf = np.cumsum(d2)
        total = cdf[-1]  # > 0 while distinct points remain unchosen
        idx = int(np.searchsorted(cdf, rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        while d2[idx] == 0.0:  # guards against landing on a zero-width bin at the edge
            idx -= 1
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return chosen


def kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    points = as_points(points)
    return points[kmeanspp_indices(points, k, rng)].copy()


def _dist2_matrix(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = np.empty((points.shape[0], centroids.shape[0]))
    for start in range(0, points.shape[0], _CHUNK):
        block = points[start:start + _CHUNK]
        out[start:start + _CHUNK] = ((block[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return out


def assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid assignment; ties go to the lowest cluster index."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[0] == 0:
        raise ValueError("need at least one centroid")
    if points.shape[1] != centroids.shape[1]:
        raise DimensionError(f"dimension mismatch: points {points.shape[1]} vs centroids {centroids.shape[1]}")
    return np.argmin(_dist2_matrix(points, centroids), axis=1).astype(np.int64)


def cluster_mean(points: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Mean of ``points[members]``. Every numeric update goes through here.

    Computed as an offset from the first member, so a cluster of coincident
    points gets exactly that point back (a plain sum / n can land an ulp away
    and raise a zero objective).
    """
    block = points[members]
    anchor = block[0]
    return anchor + (block - anchor).mean(axis=0)


def repair_empty_clusters(
    points: np.ndarray,
    assignments: np.ndarray,
    previous_centroids: np.ndarray,
    centroids: np.ndarray,
    empty: list[int],
) -> None:
    """Re-seed each empty cluster at the point farthest from its own centroid.

    Works in place on ``centroids``. Points already used for a repair in this
    call are skipped so two empty clusters never share a seed.
    """
    if not empty:
        return
    d2 = ((points - previous_centroids[assignments]) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(d2)), -d2))
    taken = 0
    for j in empty:
        centroids[j] = points[order[taken]]
        taken += 1


def update_numeric_centroids(
    points: np.ndarray,
    assignments: np.ndarray,
    k: int,
    previous_centroids: np.ndarray,
) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    previous_centroids = np.asarray(previous_centroids, dtype=np.float64)
    if points.shape[1] != previous_centroids.shape[1]:
        raise DimensionError(
            f"dimension mismatch: points {points.shape[1]} vs centroids {previous_centroids.shape[1]}"
        )
    assignments = np.asarray(assignments)
    centroids = previous_centroids.copy()
    empty = []
    for j in range(k):
        members = np.flatnonzero(assignments == j)
        if members.size:
            centroids[j] = cluster_mean(points, members)
        else:
            empty.append(j)
    repair_empty_clusters(points, assignments, previous_centroids, centroids, empty)
    return centroids


def objective(points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    """Within-cluster sum of squared distances."""
    points = np.asarray(points, dtype=np.float64)
    diff = points - np.asarray(centroids, dtype=np.float64)[np.asarray(assignments)]
    return float((diff * diff).sum())


def lloyd_step(points: np.ndarray, state: ClusterState) -> ClusterState:
    """Recompute means from the current assignments, then reassign."""
    centroids = update_numeric_centroids(points, state.assignments, state.k, state.centroids)
    return ClusterState(centroids=centroids, assignments=assign(points, centroids))


def run_kmeans(
    points: np.ndarray,
    k: int,
    T: int,
    rng: RngState,
    early_stop: bool = True,
    initial_centroids: Optional[np.ndarray] = None,
) -> tuple[ClusterState, RunReport]:
    """Plain k-means: k-means++ seeding, an initial assignment, then up to T Lloyd steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    points = as_points(points)
    if initial_centroids is None:
        centroids = kmeanspp_init(points, k, rng.stream("init"))
        init = "kmeans++"
    else:
        centroids = as_points(initial_centroids).copy()
        init = "warm"
    state = ClusterState(centroids=centroids, assignments=assign(points, centroids))
    report = RunReport(
        seed=rng.seed,
        final_state=state,
        initial_objective=objective(points, state.assignments, state.centroids),
        nominal_iterations=T,
        initialization=init,
    )
    for t in range(1, T + 1):
        if np.any(state.counts == 0):
            report.repair_iterations.append(t)
        new_state = lloyd_step(points, state)
        report.objective_trace.append(objective(points, new_state.assignments, new_state.centroids))
        unchanged = np.array_equal(new_state.assignments, state.assignments)
        state = new_state
        if early_stop and unchanged:
            logger.debug("k-means converged after %d iterations", t)
            break
    report.final_state = state
    return state, report
