"""Clustering metrics: ACC (Hungarian matching), NMI, centroid distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ContingencyMatrix:
    """``counts[i, j]`` = number of points predicted ``i`` with true label ``j``."""

    counts: np.ndarray
    n: int

    @property
    def size(self) -> int:
        return self.counts.shape[0]


def _dense(labels: Sequence[Any]) -> tuple[np.ndarray, int]:
    _, inverse = np.unique(np.asarray(labels), return_inverse=True)
    inverse = inverse.reshape(-1)
    return inverse, int(inverse.max()) + 1


def contingency(y_true: Sequence[Any], y_pred: Sequence[Any]) -> ContingencyMatrix:
    if len(y_true) != len(y_pred):
        raise ValueError(f"label vectors differ in length: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) == 0:
        raise ValueError("need at least one labelled point")
    t, nt = _dense(y_true)
    p, np_ = _dense(y_pred)
    size = max(nt, np_)
    counts = np.zeros((size, size), dtype=np.int64)
    np.add.at(counts, (p, t), 1)
    return ContingencyMatrix(counts, len(y_true))


def _entropy(marginal: np.ndarray, n: int) -> float:
    h = 0.0
    for c in marginal:
        if c > 0:
            p = c / n
            h -= p * math.log(p)
    return h


def nmi(y_true: Sequence[Any], y_pred: Sequence[Any]) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    w = contingency(y_true, y_pred)
    n = w.n
    rows = w.counts.sum(axis=1)  # predicted marginals
    cols = w.counts.sum(axis=0)  # true marginals
    mi = 0.0
    for i, j in zip(*np.nonzero(w.counts)):
        c = w.counts[i, j]
        mi += (c / n) * math.log(n * c / (rows[i] * cols[j]))
    h_true = _entropy(cols, n)
    h_pred = _entropy(rows, n)
    denom = 0.5 * (h_true + h_pred)
    if denom == 0.0:
        return 0.0
    return float(min(max(mi / denom, 0.0), 1.0))


def _solve_min(cost: np.ndarray) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Shortest-augmenting-path Hungarian method (O(n^3)).

    Returns the column matched to each row and the dual potentials
    ``u`` (rows) and ``v`` (columns) with ``u[i] + v[j] <= cost[i, j]``.
    """
    n = cost.shape[0]
    inf = math.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = [0] * (n + 1)  # owner[j] = 1-based row matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while True:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
            if j0 == 0:
                break
    match = [0] * n
    for j in range(1, n + 1):
        match[owner[j] - 1] = j - 1
    return match, u[1:], v[1:]


def _lexicographic(match: list[int], tight: np.ndarray) -> list[int]:
    """Smallest-in-row-order perfect matching within the tight-edge graph."""
    n = len(match)
    col_of = list(match)
    row_of = [0] * n
    for i, j in enumerate(col_of):
        row_of[j] = i
    fixed = [False] * n

    def reroute(row: int, target: int, blocked: int, seen: list[bool]) -> bool:
        # move `row` off its column, ending the alternating path at `target`
        for c in np.flatnonzero(tight[row]):
            c = int(c)
            if seen[c]:
                continue
            seen[c] = True
            if c == target:
                col_of[row] = c
                row_of[c] = row
                return True
            nxt = row_of[c]
            if fixed[nxt] or nxt == blocked:
                continue
            if reroute(nxt, target, blocked, seen):
                col_of[row] = c
                row_of[c] = row
                return True
        return False

    for i in range(n):
        current = col_of[i]
        for j in np.flatnonzero(tight[i]):
            j = int(j)
            if j >= current:
                break
            r = row_of[j]
            if fixed[r]:
                continue
            saved = (list(col_of), list(row_of))
            seen = [False] * n
            seen[j] = True
            if reroute(r, current, i, seen):
                col_of[i] = j
                row_of[j] = i
                break
            col_of[:], row_of[:] = saved
        fixed[i] = True
    return col_of


def hungarian(weight_matrix: Any, sense: str = "max") -> list[tuple[int, int]]:
    """Optimal perfect matching on a square matrix.

    Among all optimal matchings the one whose column sequence (row 0, row 1,
    ...) is lexicographically smallest is returned.
    """
    w = np.asarray(weight_matrix, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"hungarian needs a square matrix, got shape {w.shape}")
    if w.shape[0] == 0:
        return []
    if not np.all(np.isfinite(w)):
        raise ValueError("weight matrix has non-finite entries")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    cost = -w if sense == "max" else w
    match, u, v = _solve_min(cost)
    tol = 1e-9 * max(1.0, float(np.abs(cost).max()))
    tight = np.abs(cost - u[:, None] - v[None, :]) <= tol
    match = _lexicographic(match, tight)
    return [(i, j) for i, j in enumerate(match)]


def acc(y_true: Sequence[Any], y_pred: Sequence[Any]) -> float:
    """Fraction of points correct under the best one-to-one relabeling."""
    w = contingency(y_true, y_pred)
    matching = hungarian(w.counts, "max")
    return float(sum(w.counts[i, j] for i, j in matching) / w.n)


def acc_alignment(y_true: Sequence[Any], y_pred: Sequence[Any]) -> dict[Any, Any]:
    """Predicted label -> true label under the ACC matching (real labels only)."""
    true_vals = np.unique(np.asarray(y_true))
    pred_vals = np.unique(np.asarray(y_pred))
    w = contingency(y_true, y_pred)
    out = {}
    for i, j in hungarian(w.counts, "max"):
        if i < len(pred_vals) and j < len(true_vals):
            out[pred_vals[i].item()] = true_vals[j].item()
    return out


def label_centroids(points: np.ndarray, labels: Sequence[Any]) -> tuple[list[Any], np.ndarray]:
    """Per-label mean embeddings, labels in sorted order."""
    points = np.asarray(points, dtype=np.float64)
    labels_arr = np.asarray(labels)
    values = np.unique(labels_arr)
    cents = np.vstack([points[labels_arr == v].mean(axis=0) for v in values])
    return [v.item() for v in values], cents


def centroid_dist(learned: Any, truth: Any) -> float:
    """Mean Euclidean distance after a min-cost matching of the two sets."""
    a = np.asarray(learned, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0:
        raise ValueError("centroid sets must be non-empty 2-D arrays")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"cannot match {a.shape[0]} learned centroids to {b.shape[0]} true ones")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"centroid dims differ: {a.shape[1]} vs {b.shape[1]}")
    dists = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    matching = hungarian(dists, "min")
    return float(np.mean([dists[i, j] for i, j in matching]))


def centroid_dist_aligned(
    learned: Any,
    truth: Any,
    truth_labels: Sequence[Any],
    y_true: Sequence[Any],
    y_pred: Sequence[int],
) -> Optional[float]:
    """Experimental: pair centroids through the ACC label alignment instead.

    ``truth[i]`` is the centroid of ``truth_labels[i]``; learned centroid
    ``c`` belongs to predicted label ``c``. Returns ``None`` when some learned
    cluster has no aligned true label.
    """
    a = np.asarray(learned, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"cannot match {a.shape[0]} learned centroids to {b.shape[0]} true ones")
    align = acc_alignment(y_true, y_pred)
    position = {lab: i for i, lab in enumerate(truth_labels)}
    dists = []
    for c in range(a.shape[0]):
        if c not in align:
            return None
        dists.append(float(np.linalg.norm(a[c] - b[position[align[c]]])))
    return float(np.mean(dists))
