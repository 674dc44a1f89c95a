"""Extractive summaries used as cluster prototypes (k-NLPmeans).

A cluster's documents are split into a sentence pool, every sentence is
embedded with the document encoder, the pool is ranked by one of three
methods (centroid similarity, TextRank, LSA) and the top ``q`` sentences are
joined in rank order. The joined text is re-embedded to give the centroid.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embeddings import EmbeddingLookupError, EmbeddingProvider
from .types import Document, NLPMethod, as_points

logger = logging.getLogger(__name__)

ABBREVIATIONS = frozenset(
    """
    e.g. i.e. etc. vs. mr. mrs. ms. dr. prof. sr. jr. st. no. fig. inc. ltd. co.
    corp. approx. dept. est. min. max. jan. feb. mar. apr. jun. jul. aug. sep.
    sept. oct. nov. dec. u.s. u.k. a.m. p.m. cf. al.
    """.split()
)

_BOUNDARY = re.compile(r"[.!?]+[\"')\]]*\s+")


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitter.

    Breaks after ``.``, ``!`` or ``?`` when followed by whitespace and an
    uppercase letter or digit, unless the token before the break is a known
    abbreviation. Returns the stripped text as a single sentence if no break
    is found.
    """
    text = text.strip()
    if not text:
        return []
    sentences = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        nxt = match.end()
        if nxt >= len(text) or not (text[nxt].isupper() or text[nxt].isdigit()):
            continue
        head = text[start:match.end()].rstrip()
        last_token = head.split()[-1].lower() if head.split() else ""
        if last_token in ABBREVIATIONS:
            continue
        sentences.append(head)
        start = nxt
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass
class SentencePool:
    sentences: list[str]
    embeddings: np.ndarray
    doc_index: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.embeddings = as_points(self.embeddings)
        if len(self.sentences) != self.embeddings.shape[0]:
            raise ValueError("sentences and embeddings must be parallel")
        if not self.doc_index:
            self.doc_index = list(range(len(self.sentences)))

    def __len__(self) -> int:
        return len(self.sentences)


def _sorted_ranking(scores: np.ndarray) -> list[tuple[int, float]]:
    order = np.lexsort((np.arange(len(scores)), -scores))
    return [(int(i), float(scores[i])) for i in order]


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return mat / norms


def centroid_is_degenerate(pool: SentencePool) -> bool:
    return bool(np.linalg.norm(pool.embeddings.mean(axis=0)) == 0.0)


def centroid_rank(pool: SentencePool) -> list[tuple[int, float]]:
    """Rank sentences by cosine similarity to the mean sentence embedding."""
    center = pool.embeddings.mean(axis=0)
    norm = np.linalg.norm(center)
    if norm == 0.0:
        logger.warning("sentence pool mean is zero; using uniform centroid scores")
        return _sorted_ranking(np.ones(len(pool)))
    scores = np.clip(_unit_rows(pool.embeddings) @ (center / norm), -1.0, 1.0)
    return _sorted_ranking(scores)


def similarity_graph(pool: SentencePool) -> np.ndarray:
    """Edge weights max(0, cosine) between distinct sentences."""
    unit = _unit_rows(pool.embeddings)
    weights = np.clip(unit @ unit.T, 0.0, 1.0)
    np.fill_diagonal(weights, 0.0)
    return weights


def pagerank_transition(weights: np.ndarray) -> np.ndarray:
    """Column-stochastic transition matrix; rows with no edges jump uniformly."""
    n = weights.shape[0]
    out_weight = weights.sum(axis=1)
    trans = np.empty_like(weights)
    for i in range(n):
        if out_weight[i] > 0.0:
            trans[:, i] = weights[i] / out_weight[i]
        else:
            trans[:, i] = 1.0 / n
    return trans


def textrank_scores(
    pool: SentencePool,
    damping: float = 0.85,
    eps: float = 1e-8,
    max_iter: int = 200,
) -> np.ndarray:
    n = len(pool)
    if n == 1:
        return np.ones(1)
    trans = pagerank_transition(similarity_graph(pool))
    scores = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    for _ in range(max_iter):
        new = teleport + damping * (trans @ scores)
        new /= new.sum()
        change = np.abs(new - scores).sum()
        scores = new
        if change < eps:
            break
    return scores


def textrank_rank(
    pool: SentencePool,
    damping: float = 0.85,
    eps: float = 1e-8,
    max_iter: int = 200,
) -> list[tuple[int, float]]:
    """Weighted PageRank over the sentence similarity graph."""
    return _sorted_ranking(textrank_scores(pool, damping, eps, max_iter))


def lsa_scores(pool: SentencePool, r: int) -> np.ndarray:
    """Row norms of ``U[:, :r'] * S[:r']`` from the thin SVD of the pool."""
    if r < 1:
        raise ValueError("r must be >= 1")
    a = pool.embeddings
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    tol = s[0] * max(a.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int((s > tol).sum())
    r_eff = min(r, rank)
    if r_eff == 0:
        return np.zeros(len(pool))
    weighted = u[:, :r_eff] * s[:r_eff]
    return np.sqrt((weighted ** 2).sum(axis=1))


def lsa_rank(pool: SentencePool, r: int) -> list[tuple[int, float]]:
    return _sorted_ranking(lsa_scores(pool, r))


def rank_pool(
    pool: SentencePool,
    method: NLPMethod | str,
    r: Optional[int] = None,
    q: int = 5,
    damping: float = 0.85,
    eps: float = 1e-8,
    max_iter: int = 200,
) -> list[tuple[int, float]]:
    method = NLPMethod(method)
    if method is NLPMethod.CENTROID:
        return centroid_rank(pool)
    if method is NLPMethod.TEXTRANK:
        return textrank_rank(pool, damping, eps, max_iter)
    return lsa_rank(pool, r if r is not None else q)


def extract_summary(pool: SentencePool, method: NLPMethod | str, q: int, r: Optional[int] = None) -> str:
    """Top ``min(q, len(pool))`` sentences in rank order, space-joined."""
    if q < 1:
        raise ValueError("q must be >= 1")
    ranking = rank_pool(pool, method, r=r, q=q)
    return " ".join(pool.sentences[i] for i, _ in ranking[:q])


def build_pool(
    docs: Sequence[Document],
    provider: EmbeddingProvider,
    doc_vectors: Optional[np.ndarray] = None,
    cap: Optional[int] = None,
) -> tuple[SentencePool, list[str]]:
    """Split ``docs`` into a sentence pool and embed every sentence.

    Returns the pool and a list of notes. When the provider cannot embed a
    sentence (a file store without an ad-hoc fallback) and ``doc_vectors``
    is supplied, the sentence borrows its document's vector.
    """
    notes: list[str] = []
    sentences: list[str] = []
    owners: list[int] = []
    for d, doc in enumerate(docs):
        for sent in split_sentences(doc.text):
            sentences.append(sent)
            owners.append(d)
    if cap is not None and len(sentences) > cap:
        notes.append(f"sentence pool capped at {cap} of {len(sentences)}")
        sentences, owners = sentences[:cap], owners[:cap]
    try:
        vectors = provider.embed_batch(sentences)
    except EmbeddingLookupError:
        if doc_vectors is None:
            raise
        notes.append("fallback: sentence vectors borrowed from their documents")
        vectors = np.vstack(
            [_embed_or_doc(provider, s, doc_vectors[o]) for s, o in zip(sentences, owners)]
        )
    return SentencePool(sentences, vectors, owners), notes


def _embed_or_doc(provider: EmbeddingProvider, sentence: str, doc_vector: np.ndarray) -> np.ndarray:
    try:
        return provider.embed_one(sentence)
    except EmbeddingLookupError:
        return doc_vector


@dataclass
class NLPSummary:
    vector: np.ndarray
    text: str
    method: str
    fallback: bool = False
    notes: list[str] = field(default_factory=list)


def nlp_centroid(
    docs: Sequence[Document],
    provider: EmbeddingProvider,
    method: NLPMethod | str,
    q: int,
    r: Optional[int] = None,
    doc_vectors: Optional[np.ndarray] = None,
    pool_cap: Optional[int] = None,
) -> NLPSummary:
    """Summarize a cluster extractively and embed the summary."""
    if not docs:
        raise ValueError("cannot summarize an empty cluster")
    method = NLPMethod(method)
    pool, notes = build_pool(docs, provider, doc_vectors, pool_cap)
    if method is NLPMethod.CENTROID and centroid_is_degenerate(pool):
        notes.append("degenerate pool mean; uniform centroid scores")
    ranking = rank_pool(pool, method, r=r, q=q)
    top = ranking[:q]
    text = " ".join(pool.sentences[i] for i, _ in top)
    fallback = any(n.startswith("fallback") for n in notes)
    try:
        vector = provider.embed_one(text)
    except EmbeddingLookupError:
        idx = [i for i, _ in top]
        weights = np.array([max(s, 0.0) for _, s in top])
        if weights.sum() <= 0.0:
            weights = np.ones(len(top))
        vector = (weights[:, None] * pool.embeddings[idx]).sum(axis=0) / weights.sum()
        notes.append("fallback: summary vector is the score-weighted mean of its sentences")
        fallback = True
    return NLPSummary(vector=vector, text=text, method=method.value, fallback=fallback, notes=notes)
