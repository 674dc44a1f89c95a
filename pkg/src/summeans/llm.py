"""LLM-generated cluster prototypes (k-LLMmeans).

The LLM sees an instruction plus a small sample of a cluster's documents
and returns one text. That text, embedded with the document encoder, becomes
the cluster centroid.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import httpx
import numpy as np

from .embeddings import EmbeddingProvider
from .nlp import split_sentences
from .types import Document, PromptRecord, Sampling

logger = logging.getLogger(__name__)

LLM_API_KEY_ENV = "LLM_API_KEY"

BANK77_INSTRUCTION = (
    "The following is a cluster of online banking questions. "
    "Write a single question that represents the cluster concisely."
)
DEFAULT_INSTRUCTION = "The following is a cluster of documents. Write a single sentence that represents the cluster concisely."


class LLMError(RuntimeError):
    pass


def sample_representatives(
    cluster_embeddings: np.ndarray,
    cluster_doc_indices: Sequence[int],
    m: int,
    strategy: Sampling | str,
    rng: np.random.Generator,
) -> list[int]:
    """Pick ``min(m, |cluster|)`` distinct documents to show the LLM.

    ``kmeanspp`` draws D^2-weighted within the cluster, ``random`` draws
    uniformly without replacement, ``centroid`` takes the points nearest the
    cluster mean and ``edge`` the farthest. Ties go to the lower position.
    """
    emb = np.asarray(cluster_embeddings, dtype=np.float64)
    doc_idx = list(cluster_doc_indices)
    n = len(doc_idx)
    if n == 0 or emb.shape[0] != n:
        raise ValueError("cluster embeddings and indices must be parallel and non-empty")
    if m < 1:
        raise ValueError("m must be >= 1")
    m_j = min(m, n)
    strategy = Sampling(strategy)

    if strategy is Sampling.RANDOM:
        picks = rng.permutation(n)[:m_j].tolist()
    elif strategy in (Sampling.NEAREST_CENTROID, Sampling.FARTHEST):
        d2 = ((emb - emb.mean(axis=0)) ** 2).sum(axis=1)
        key = d2 if strategy is Sampling.NEAREST_CENTROID else -d2
        picks = np.lexsort((np.arange(n), key))[:m_j].tolist()
    else:
        picks = [int(rng.integers(n))]
        available = np.ones(n, dtype=bool)
        available[picks[0]] = False
        d2 = ((emb - emb[picks[0]]) ** 2).sum(axis=1)
        while len(picks) < m_j:
            weights = np.where(available, d2, 0.0)
            total = weights.sum()
            if total > 0.0:
                cdf = np.cumsum(weights)
                idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                idx = min(idx, n - 1)
                while not available[idx] or weights[idx] == 0.0:
                    idx -= 1
            else:
                # only duplicates of chosen points remain
                remaining = np.flatnonzero(available)
                idx = int(remaining[rng.integers(len(remaining))])
            picks.append(idx)
            available[idx] = False
            d2 = np.minimum(d2, ((emb - emb[idx]) ** 2).sum(axis=1))
    return [doc_idx[p] for p in picks]


def build_prompt(instruction: str, docs: Sequence[Document | str]) -> str:
    """Instruction, a blank line, then one numbered document per line."""
    if not docs:
        raise ValueError("a prompt needs at least one document")
    lines = []
    for i, doc in enumerate(docs, 1):
        text = doc.text if isinstance(doc, Document) else str(doc)
        lines.append(f"{i}. {' '.join(text.split())}")
    return instruction + "\n\n" + "\n".join(lines)


@dataclass
class PromptContext:
    """Side information handed to clients; real endpoints ignore it."""

    texts: list[str]
    embeddings: np.ndarray
    cluster_mean: np.ndarray


class ChatClient(Protocol):
    def complete(self, prompt: str, context: Optional[PromptContext] = None) -> str: ...


class RemoteChatClient:
    """OpenAI-style chat-completions client with retries."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        max_output_tokens: int = 256,
        timeout: float = 60.0,
        retries: int = 2,
        api_key: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff: float = 0.5,
    ) -> None:
        if temperature < 0:
            raise ValueError("temperature must be >= 0")
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        key = api_key if api_key is not None else os.environ.get(LLM_API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def describe(self) -> dict:
        return {"kind": "remote", "endpoint": self.endpoint, "model": self.model, "temperature": self.temperature}

    def complete(self, prompt: str, context: Optional[PromptContext] = None) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        }
        attempts = self.retries + 1
        last_exc: Exception | None = None
        for attempt in range(1, attempts + 1):
            try:
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (httpx.HTTPError, KeyError, IndexError, ValueError, TypeError) as exc:
                last_exc = exc
                logger.warning("LLM request failed (attempt %d/%d): %s", attempt, attempts, exc)
                if attempt < attempts:
                    self._sleep(self.backoff * 2 ** (attempt - 1))
        raise LLMError(f"LLM request failed after {attempts} attempts: {last_exc}")


class EchoMedoidClient:
    """Mock: answers with the sampled document closest to the cluster mean."""

    def describe(self) -> dict:
        return {"kind": "mock-echo"}

    def complete(self, prompt: str, context: Optional[PromptContext] = None) -> str:
        if context is None:
            raise LLMError("echo-medoid mock needs a prompt context")
        d2 = ((context.embeddings - context.cluster_mean) ** 2).sum(axis=1)
        return context.texts[int(np.argmin(d2))]


class ConcatFirstSentencesClient:
    """Mock: joins the first sentence of each sampled document."""

    def __init__(self, limit: int = 3) -> None:
        self.limit = limit

    def describe(self) -> dict:
        return {"kind": "mock-concat", "limit": self.limit}

    def complete(self, prompt: str, context: Optional[PromptContext] = None) -> str:
        if context is None:
            raise LLMError("concat mock needs a prompt context")
        firsts = [split_sentences(t)[0] for t in context.texts[: self.limit]]
        return " ".join(firsts)


class CountingClient:
    """Wraps a client and counts calls (thread-safe)."""

    def __init__(self, inner: ChatClient) -> None:
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def describe(self) -> dict:
        inner = getattr(self.inner, "describe", lambda: {"kind": type(self.inner).__name__})()
        return {"kind": "counting", "inner": inner}

    def complete(self, prompt: str, context: Optional[PromptContext] = None) -> str:
        with self._lock:
            self.calls += 1
        return self.inner.complete(prompt, context)


def client_from_string(spec: str, model: str = "gpt-4o", temperature: float = 0.0) -> ChatClient:
    if spec == "mock-echo":
        return EchoMedoidClient()
    if spec == "mock-concat":
        return ConcatFirstSentencesClient()
    if spec.startswith("remote:"):
        return RemoteChatClient(spec[7:], model=model, temperature=temperature)
    raise ValueError(f"unknown LLM client {spec!r}; expected mock-echo, mock-concat or remote:URL")


@dataclass
class LLMSummary:
    vector: Optional[np.ndarray]
    text: str
    record: PromptRecord
    fallback: bool = False
    note: str = ""


def llm_centroid(
    docs: Sequence[Document],
    embeddings: np.ndarray,
    provider: EmbeddingProvider,
    client: ChatClient,
    instruction: str,
    m: int,
    strategy: Sampling | str,
    rng: np.random.Generator,
) -> LLMSummary:
    """Sample, prompt, call the client, and embed its answer.

    On client failure or an empty answer the returned summary has
    ``vector=None`` and ``fallback=True``; the caller substitutes the
    numeric mean.
    """
    if not docs:
        raise ValueError("cannot summarize an empty cluster")
    embeddings = np.asarray(embeddings, dtype=np.float64)
    picks = sample_representatives(embeddings, list(range(len(docs))), m, strategy, rng)
    sampled = [docs[i] for i in picks]
    prompt = build_prompt(instruction, sampled)
    record = PromptRecord(instruction, [d.id for d in sampled], prompt, "")
    context = PromptContext([d.text for d in sampled], embeddings[picks], embeddings.mean(axis=0))
    try:
        response = client.complete(prompt, context)
    except Exception as exc:  # noqa: BLE001 - any client failure degrades to the mean
        logger.warning("LLM summary failed: %s", exc)
        return LLMSummary(None, "", record, fallback=True, note=f"client error: {exc}")
    record.response = response
    if not response or not response.strip():
        return LLMSummary(None, "", record, fallback=True, note="empty response")
    return LLMSummary(provider.embed_one(response), response, record)
