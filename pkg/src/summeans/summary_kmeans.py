"""k-means with periodic summarization steps.

Every ``l`` update iterations the numeric mean update is replaced by a
per-cluster summarizer whose output vector becomes the centroid. Between
summary steps the run is ordinary Lloyd iteration, so a summarizer that
returns the numeric mean reproduces plain k-means exactly.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embeddings import EmbeddingProvider
from .kmeans import assign, cluster_mean, kmeanspp_init, objective, repair_empty_clusters, update_numeric_centroids
from .llm import DEFAULT_INSTRUCTION, ChatClient, llm_centroid
from .nlp import nlp_centroid
from .types import (
    ClusterState,
    Document,
    PromptRecord,
    RngState,
    RunReport,
    Schedule,
    SummarizerKind,
    SummarizerSpec,
    SummaryEvent,
    as_points,
    count_summary_steps,
)

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterInput",
    "Summary",
    "Summarizer",
    "NumericMeanSummarizer",
    "MeanEchoSummarizer",
    "NLPSummarizer",
    "LLMSummarizer",
    "build_summarizer",
    "run_summary_kmeans",
    "count_summary_steps",
]


@dataclass
class ClusterInput:
    """Everything a summarizer may look at for one cluster."""

    cluster: int
    iteration: int
    members: np.ndarray
    docs: Sequence[Document]
    points: np.ndarray
    rng: np.random.Generator

    @property
    def member_points(self) -> np.ndarray:
        return self.points[self.members]

    @property
    def member_docs(self) -> list[Document]:
        return [self.docs[i] for i in self.members]


@dataclass
class Summary:
    vector: Optional[np.ndarray]
    text: Optional[str]
    method: str
    fallback: bool = False
    note: str = ""
    prompt: Optional[PromptRecord] = None


class Summarizer:
    """Turns one cluster into a centroid vector (and usually a text)."""

    method = "abstract"
    #: numeric summarizers produce no text and no summary events
    textual = True

    def summarize(self, cluster: ClusterInput) -> Summary:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"method": self.method}


class NumericMeanSummarizer(Summarizer):
    method = "numeric-mean"
    textual = False

    def summarize(self, cluster: ClusterInput) -> Summary:
        return Summary(cluster_mean(cluster.points, cluster.members), None, self.method)


class MeanEchoSummarizer(Summarizer):
    """Test stub: logs an event but hands back the exact numeric mean."""

    method = "mean-echo"

    def summarize(self, cluster: ClusterInput) -> Summary:
        return Summary(cluster_mean(cluster.points, cluster.members), "", self.method)


class NLPSummarizer(Summarizer):
    def __init__(
        self,
        provider: EmbeddingProvider,
        method: str = "lsa",
        q: int = 5,
        r: Optional[int] = None,
        pool_cap: Optional[int] = None,
    ) -> None:
        self.provider = provider
        self.nlp_method = method
        self.method = f"nlp:{method}"
        self.q = q
        self.r = r
        self.pool_cap = pool_cap

    def describe(self) -> dict:
        return {"method": self.method, "q": self.q, "r": self.r, "pool_cap": self.pool_cap}

    def summarize(self, cluster: ClusterInput) -> Summary:
        result = nlp_centroid(
            cluster.member_docs,
            self.provider,
            self.nlp_method,
            self.q,
            r=self.r,
            doc_vectors=cluster.member_points,
            pool_cap=self.pool_cap,
        )
        return Summary(result.vector, result.text, self.method, result.fallback, "; ".join(result.notes))


class LLMSummarizer(Summarizer):
    def __init__(
        self,
        provider: EmbeddingProvider,
        client: ChatClient,
        instruction: str = DEFAULT_INSTRUCTION,
        m: int = 10,
        sampling: str = "kmeanspp",
        full_cluster: bool = False,
        full_cluster_cap: int = 50,
    ) -> None:
        self.provider = provider
        self.client = client
        self.instruction = instruction
        self.m = m
        self.sampling = sampling
        self.full_cluster = full_cluster
        self.full_cluster_cap = full_cluster_cap
        self.method = "llm:full" if full_cluster else f"llm:fs-{sampling}"

    def describe(self) -> dict:
        return {
            "method": self.method,
            "m": self.m,
            "instruction": self.instruction,
            "full_cluster_cap": self.full_cluster_cap if self.full_cluster else None,
        }

    def summarize(self, cluster: ClusterInput) -> Summary:
        m = min(len(cluster.members), self.full_cluster_cap) if self.full_cluster else self.m
        result = llm_centroid(
            cluster.member_docs,
            cluster.member_points,
            self.provider,
            self.client,
            self.instruction,
            m,
            self.sampling,
            cluster.rng,
        )
        return Summary(result.vector, result.text or None, self.method, result.fallback, result.note, result.record)


def build_summarizer(
    spec: SummarizerSpec,
    provider: Optional[EmbeddingProvider] = None,
    client: Optional[ChatClient] = None,
) -> Summarizer:
    if spec.kind is SummarizerKind.NUMERIC_MEAN:
        return NumericMeanSummarizer()
    if provider is None:
        raise ValueError("textual summarizers need an embedding provider")
    if spec.kind is SummarizerKind.NLP:
        return NLPSummarizer(provider, spec.nlp_method.value, spec.q, spec.lsa_components, spec.pool_cap)
    if client is None:
        raise ValueError("the LLM summarizer needs a chat client")
    return LLMSummarizer(
        provider,
        client,
        spec.instruction or DEFAULT_INSTRUCTION,
        spec.m,
        spec.sampling.value,
        spec.full_cluster,
        spec.full_cluster_cap,
    )


def _safe_summarize(summarizer: Summarizer, cluster: ClusterInput) -> Summary:
    try:
        return summarizer.summarize(cluster)
    except Exception as exc:  # noqa: BLE001 - one bad cluster must not abort the run
        logger.warning("summarizer failed on cluster %d at t=%d: %s", cluster.cluster, cluster.iteration, exc)
        return Summary(None, None, summarizer.method, fallback=True, note=f"error: {exc}")


def _summary_step(
    points: np.ndarray,
    docs: Sequence[Document],
    state: ClusterState,
    summarizer: Summarizer,
    rng: RngState,
    t: int,
    max_workers: int,
) -> tuple[np.ndarray, list[Optional[str]], list[SummaryEvent]]:
    k = state.k
    centroids = state.centroids.copy()
    texts: list[Optional[str]] = list(state.summaries)
    inputs = []
    empty = []
    for j in range(k):
        members = np.flatnonzero(state.assignments == j)
        if members.size:
            inputs.append(ClusterInput(j, t, members, docs, points, rng.stream(f"summary/{t}/{j}")))
        else:
            empty.append(j)
    if max_workers > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda c: _safe_summarize(summarizer, c), inputs))
    else:
        results = [_safe_summarize(summarizer, c) for c in inputs]

    events = []
    for cin, res in zip(inputs, results):
        j = cin.cluster
        vector = res.vector
        fallback = res.fallback
        if vector is not None:
            vector = np.asarray(vector, dtype=np.float64)
            if vector.shape != (points.shape[1],) or not np.all(np.isfinite(vector)):
                vector = None
                fallback = True
                res.note = (res.note + "; " if res.note else "") + "invalid summary vector"
        if vector is None:
            vector = cluster_mean(points, cin.members)
            fallback = True
        centroids[j] = vector
        if res.text is not None:
            texts[j] = res.text
        if summarizer.textual:
            events.append(SummaryEvent(t, j, res.text, res.method, fallback, res.note, res.prompt))
    repair_empty_clusters(points, state.assignments, state.centroids, centroids, empty)
    return centroids, texts, events


def run_summary_kmeans(
    docs: Sequence[Document],
    embeddings: np.ndarray,
    k: int,
    summarizer: Summarizer | SummarizerSpec,
    schedule: Schedule,
    rng: RngState,
    initial_centroids: Optional[np.ndarray] = None,
    provider: Optional[EmbeddingProvider] = None,
    client: Optional[ChatClient] = None,
    max_workers: int = 1,
) -> tuple[ClusterState, RunReport]:
    """Run k-means for ``schedule.T`` update iterations with summary steps.

    The run seeds with k-means++ (or ``initial_centroids``) and assigns every
    point; then for t = 1..T the centroids are recomputed, by summarization
    when ``t % l == 0`` and by the numeric mean otherwise, and the points are
    reassigned. There is no early stopping, so every scheduled summary step
    fires. Summarizer failures fall back to the numeric mean for that cluster
    and are flagged on the event.
    """
    points = as_points(embeddings)
    if len(docs) != points.shape[0]:
        raise ValueError(f"{len(docs)} documents but {points.shape[0]} embeddings")
    if isinstance(summarizer, SummarizerSpec):
        summarizer = build_summarizer(summarizer, provider, client)

    if initial_centroids is None:
        centroids = kmeanspp_init(points, k, rng.stream("init"))
        init = "kmeans++"
    else:
        centroids = as_points(initial_centroids).copy()
        if centroids.shape != (k, points.shape[1]):
            raise ValueError(f"initial centroids have shape {centroids.shape}, expected {(k, points.shape[1])}")
        init = "warm"

    state = ClusterState(centroids=centroids, assignments=assign(points, centroids))
    report = RunReport(
        seed=rng.seed,
        final_state=state,
        initial_objective=objective(points, state.assignments, state.centroids),
        nominal_iterations=schedule.T,
        initialization=init,
    )
    for t in range(1, schedule.T + 1):
        if np.any(state.counts == 0):
            report.repair_iterations.append(t)
        if schedule.is_summary_step(t):
            new_centroids, texts, events = _summary_step(points, docs, state, summarizer, rng, t, max_workers)
            report.summary_iterations.append(t)
            report.summary_events.extend(events)
        else:
            new_centroids = update_numeric_centroids(points, state.assignments, k, state.centroids)
            texts = list(state.summaries)
        state = ClusterState(new_centroids, assign(points, new_centroids), tuple(texts))
        report.objective_trace.append(objective(points, state.assignments, state.centroids))
    report.final_state = state
    if count_summary_steps(schedule) == 0:
        report.notes.append("no summary step fits in the schedule; this was plain k-means")
    return state, report
