"""Sequential mini-batch clustering with count-weighted centroid merging."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .summary_kmeans import Summarizer, run_summary_kmeans
from .types import ClusterState, Document, RngState, RunReport, Schedule

logger = logging.getLogger(__name__)


class StreamAborted(RuntimeError):
    """A batch failed; ``state`` holds everything merged before it."""

    def __init__(self, message: str, state: "StreamState", batch_index: int) -> None:
        super().__init__(message)
        self.state = state
        self.batch_index = batch_index


@dataclass
class StreamState:
    centroids: np.ndarray
    cumulative_counts: np.ndarray
    batch_reports: list[RunReport] = field(default_factory=list)
    last_batch_counts: Optional[np.ndarray] = None
    last_batch_centroids: Optional[np.ndarray] = None
    last_batch_index: int = -1

    @classmethod
    def empty(cls, k: int, dim: int) -> "StreamState":
        return cls(np.zeros((k, dim)), np.zeros(k, dtype=np.int64))

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def warm_start(self) -> np.ndarray:
        """Centroids for the next batch.

        Clusters that have never held a document still sit at the zero
        vector; they restart from the last batch's centroid instead.
        """
        start = self.centroids.copy()
        if self.last_batch_centroids is not None:
            unseen = self.cumulative_counts == 0
            start[unseen] = self.last_batch_centroids[unseen]
        return start


def split_batches(docs: Sequence[Document], target: int = 10000) -> list[list[Document]]:
    """Chronological split into ceil(n / target) near-equal batches.

    Earlier batches take the remainder, so sizes never differ by more than one.
    """
    if target < 1:
        raise ValueError("target batch size must be >= 1")
    missing = [d.id for d in docs if d.timestamp is None]
    if missing:
        raise ValueError(
            f"{len(missing)} documents lack timestamps (first: {missing[0]!r}); "
            "use static mode for unordered corpora"
        )
    ordered = sorted(docs, key=lambda d: (d.timestamp, d.id))
    n = len(ordered)
    if n == 0:
        return []
    b = math.ceil(n / target)
    base, extra = divmod(n, b)
    batches = []
    start = 0
    for i in range(b):
        size = base + (1 if i < extra else 0)
        batches.append(ordered[start:start + size])
        start += size
    return batches


def merge_centroids(state: StreamState, batch_state: ClusterState, cumulative: bool = True) -> StreamState:
    """Blend a batch's centroids into the stream.

    For cluster j the weight is eta = n_batch / (n_seen + n_batch), where
    n_seen is the cumulative count (or, with ``cumulative=False``, the
    previous batch's count). eta is 1 for a cluster seen for the first time
    and 0 for a cluster that is empty in this batch.
    """
    if batch_state.k != state.k or batch_state.dim != state.centroids.shape[1]:
        raise ValueError(
            f"batch state is {batch_state.k}x{batch_state.dim}, stream is {state.k}x{state.centroids.shape[1]}"
        )
    batch_counts = batch_state.counts
    if cumulative or state.last_batch_counts is None:
        seen = state.cumulative_counts
    else:
        seen = state.last_batch_counts
    centroids = state.centroids.copy()
    for j in range(state.k):
        nb = int(batch_counts[j])
        if nb == 0:
            continue
        if seen[j] == 0:
            centroids[j] = batch_state.centroids[j]
        else:
            eta = nb / (int(seen[j]) + nb)
            centroids[j] = centroids[j] * (1.0 - eta) + eta * batch_state.centroids[j]
    return StreamState(
        centroids=centroids,
        cumulative_counts=state.cumulative_counts + batch_counts,
        batch_reports=list(state.batch_reports),
        last_batch_counts=batch_counts,
        last_batch_centroids=np.array(batch_state.centroids),
        last_batch_index=state.last_batch_index + 1,
    )


def write_checkpoint(path: str | Path, state: StreamState, seed: int) -> None:
    payload = {
        "centroids": state.centroids.tolist(),
        "cumulative_counts": state.cumulative_counts.tolist(),
        "last_batch_index": state.last_batch_index,
        "seed": seed,
        "last_batch_counts": None if state.last_batch_counts is None else state.last_batch_counts.tolist(),
        "last_batch_centroids": None
        if state.last_batch_centroids is None
        else state.last_batch_centroids.tolist(),
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True))
    os.replace(tmp, path)


def read_checkpoint(path: str | Path) -> tuple[StreamState, int]:
    data = json.loads(Path(path).read_text())
    state = StreamState(
        centroids=np.asarray(data["centroids"], dtype=np.float64),
        cumulative_counts=np.asarray(data["cumulative_counts"], dtype=np.int64),
        last_batch_index=int(data["last_batch_index"]),
    )
    if data.get("last_batch_counts") is not None:
        state.last_batch_counts = np.asarray(data["last_batch_counts"], dtype=np.int64)
    if data.get("last_batch_centroids") is not None:
        state.last_batch_centroids = np.asarray(data["last_batch_centroids"], dtype=np.float64)
    return state, int(data["seed"])


def run_stream(
    batches: Sequence[tuple[Sequence[Document], np.ndarray]],
    k: int,
    summarizer: Summarizer,
    schedule: Schedule,
    rng: RngState,
    checkpoint_path: Optional[str | Path] = None,
    resume: Optional[StreamState] = None,
    cumulative: bool = True,
    max_workers: int = 1,
) -> StreamState:
    """Cluster ``(docs, embeddings)`` batches in order, merging as we go.

    Batch 0 seeds with k-means++ under ``rng`` itself, so a one-batch stream
    reproduces the static run. Later batches warm-start from the stream
    centroids and draw from ``rng.child(i)``. With ``resume`` the batches up
    to ``resume.last_batch_index`` are skipped.
    """
    if not batches:
        raise ValueError("need at least one batch")
    dim = np.asarray(batches[0][1]).shape[1]
    state = resume if resume is not None else StreamState.empty(k, dim)
    for i, (docs, points) in enumerate(batches):
        if i <= state.last_batch_index:
            continue
        batch_rng = rng if i == 0 else rng.child(i)
        initial = None if i == 0 else state.warm_start()
        try:
            batch_state, report = run_summary_kmeans(
                docs, points, k, summarizer, schedule, batch_rng,
                initial_centroids=initial, max_workers=max_workers,
            )
        except Exception as exc:
            if checkpoint_path is not None:
                write_checkpoint(checkpoint_path, state, rng.seed)
            raise StreamAborted(f"batch {i} failed: {exc}", state, i) from exc
        for event in report.summary_events:
            event.batch = i
        state = merge_centroids(state, batch_state, cumulative=cumulative)
        state.last_batch_index = i
        state.batch_reports.append(report)
        logger.info("batch %d/%d merged (%d docs)", i + 1, len(batches), len(docs))
        if checkpoint_path is not None:
            write_checkpoint(checkpoint_path, state, rng.seed)
    return state
