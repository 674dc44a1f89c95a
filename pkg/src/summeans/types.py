"""Domain types and vector arithmetic shared across the package.

Embeddings are plain float64 numpy arrays: a single vector is 1-D, a set of
points is a 2-D ``(n, dim)`` array. The helpers here validate shape and
finiteness at the boundaries so the algorithms can stay free of checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when two vectors (or a vector and a provider) disagree on dim."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: Optional[str] = None
    timestamp: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("document id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


def check_unique_ids(docs: Sequence[Document]) -> None:
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise ValueError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)


def as_vector(values: Any, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``values`` into a finite 1-D float64 vector."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.size != dim:
        raise DimensionError(f"vector has dim {vec.size}, expected {dim}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("vector contains NaN or Inf")
    return vec


def as_points(values: Any) -> np.ndarray:
    """Coerce ``values`` into a finite ``(n, dim)`` float64 matrix."""
    pts = np.asarray(values, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError(f"expected a non-empty (n, dim) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or Inf")
    return pts


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def euclidean_dist2(a: Any, b: Any) -> float:
    """Squared Euclidean distance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    diff = a - b
    return float(np.dot(diff, diff))


def cosine_similarity(a: Any, b: Any) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def mean_vector(points: Any) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("mean of an empty set of vectors is undefined")
    return pts.mean(axis=0)


class SummarizerKind(str, Enum):
    NUMERIC_MEAN = "numeric-mean"
    NLP = "nlp"
    LLM = "llm"


class NLPMethod(str, Enum):
    TEXTRANK = "textrank"
    CENTROID = "centroid"
    LSA = "lsa"


class Sampling(str, Enum):
    KMEANSPP = "kmeanspp"
    RANDOM = "random"
    NEAREST_CENTROID = "centroid"
    FARTHEST = "edge"


@dataclass(frozen=True)
class SummarizerSpec:
    """Selects how centroids are recomputed at summarization steps."""

    kind: SummarizerKind = SummarizerKind.NUMERIC_MEAN
    nlp_method: NLPMethod = NLPMethod.LSA
    q: int = 5
    lsa_components: Optional[int] = None
    instruction: str = ""
    m: int = 10
    sampling: Sampling = Sampling.KMEANSPP
    full_cluster: bool = False
    full_cluster_cap: int = 50
    pool_cap: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SummarizerKind(self.kind))
        object.__setattr__(self, "nlp_method", NLPMethod(self.nlp_method))
        object.__setattr__(self, "sampling", Sampling(self.sampling))
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.lsa_components is not None and self.lsa_components < 1:
            raise ValueError("lsa_components must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "nlp_method": self.nlp_method.value,
            "q": self.q,
            "lsa_components": self.lsa_components,
            "instruction": self.instruction,
            "m": self.m,
            "sampling": self.sampling.value,
            "full_cluster": self.full_cluster,
            "full_cluster_cap": self.full_cluster_cap,
            "pool_cap": self.pool_cap,
        }


@dataclass(frozen=True)
class Schedule:
    T: int = 120
    l: int = 60  # noqa: E741

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.l < 1:
            raise ValueError("summary period l must be >= 1")

    def is_summary_step(self, t: int) -> bool:
        return t % self.l == 0

    @classmethod
    def single(cls, T: int = 120) -> "Schedule":
        return cls(T=T, l=60)

    @classmethod
    def multiple(cls, T: int = 120) -> "Schedule":
        return cls(T=T, l=20)


def count_summary_steps(schedule: Schedule) -> int:
    return schedule.T // schedule.l


class RngState:
    """Seeded source of independent, named random streams.

    Every stream is a Philox (counter-based) generator keyed by the seed, the
    child path and a stable hash of the stream name, so drawing from one stream
    never shifts another and results do not depend on call interleaving.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()) -> None:
        self.seed = int(seed)
        self.path = tuple(path)

    def stream(self, name: str) -> np.random.Generator:
        tag = int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "little")
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *self.path, tag])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngState":
        return RngState(self.seed, self.path + (int(index),))

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, path={self.path})"


@dataclass(frozen=True)
class ClusterState:
    centroids: np.ndarray
    assignments: np.ndarray
    summaries: tuple[Optional[str], ...] = ()

    def __post_init__(self) -> None:
        centroids = as_points(self.centroids)
        assignments = np.asarray(self.assignments, dtype=np.int64)
        k = centroids.shape[0]
        if assignments.ndim != 1:
            raise ValueError("assignments must be 1-D")
        if assignments.size and (assignments.min() < 0 or assignments.max() >= k):
            raise ValueError("assignment outside [0, k)")
        summaries = tuple(self.summaries) or (None,) * k
        if len(summaries) != k:
            raise ValueError("need one summary slot per cluster")
        centroids.setflags(write=False)
        assignments.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "summaries", summaries)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "assignments": self.assignments.tolist(),
            "counts": self.counts.tolist(),
            "summaries": list(self.summaries),
        }


@dataclass
class PromptRecord:
    instruction: str
    sampled_doc_ids: list[str]
    rendered_prompt: str
    response: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "instruction": self.instruction,
            "sampled_doc_ids": list(self.sampled_doc_ids),
            "rendered_prompt": self.rendered_prompt,
            "response": self.response,
        }


@dataclass
class SummaryEvent:
    iteration: int
    cluster: int
    text: Optional[str]
    method: str
    fallback: bool = False
    note: str = ""
    prompt: Optional[PromptRecord] = None
    batch: Optional[int] = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "iteration": self.iteration,
            "cluster": self.cluster,
            "text": self.text,
            "method": self.method,
            "fallback": self.fallback,
            "note": self.note,
            "batch": self.batch,
        }
        if self.prompt is not None:
            out["prompt"] = self.prompt.to_dict()
        return out


@dataclass
class RunReport:
    seed: int
    final_state: ClusterState
    objective_trace: list[float] = field(default_factory=list)
    summary_events: list[SummaryEvent] = field(default_factory=list)
    summary_iterations: list[int] = field(default_factory=list)
    repair_iterations: list[int] = field(default_factory=list)
    initial_objective: Optional[float] = None
    nominal_iterations: int = 0
    initialization: str = "kmeans++"
    notes: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective_trace)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "initialization": self.initialization,
            "nominal_iterations": self.nominal_iterations,
            "iterations": self.iterations,
            "initial_objective": self.initial_objective,
            "objective_trace": list(self.objective_trace),
            "summary_iterations": list(self.summary_iterations),
            "repair_iterations": list(self.repair_iterations),
            "summary_events": [e.to_dict() for e in self.summary_events],
            "notes": list(self.notes),
            "final_state": self.final_state.to_dict(),
        }


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj: Any, length: int = 16) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:length]
