"""Text -> vector providers.

Three interchangeable backends share one interface (``embed_batch`` /
``embed_one``):

* ``TestHashEmbedder``: offline, deterministic feature hashing.
* ``FileStoreEmbedder``: lookup in a JSON Lines store of precomputed vectors.
* ``RemoteEmbedder``: an HTTP embedding endpoint with batching and retries.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import httpx
import numpy as np

from .types import DimensionError, Document, as_vector

logger = logging.getLogger(__name__)

EMBED_API_KEY_ENV = "EMBED_API_KEY"


class EmbeddingError(RuntimeError):
    pass


class EmbeddingLookupError(EmbeddingError, KeyError):
    """A text (or document id) has no vector in a file store."""

    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


def content_key(text: str) -> str:
    """Store key used for texts that are not corpus documents."""
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    return vec / norm


class EmbeddingProvider:
    """Base class. Subclasses implement ``_embed`` on a validated batch."""

    kind = "abstract"

    def __init__(self, dim: int, normalize: bool = True) -> None:
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.normalize = normalize
        self.calls = 0
        self.texts_embedded = 0
        self._lock = threading.Lock()

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "normalize": self.normalize}

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Embed ``texts`` into a ``(len(texts), dim)`` array, preserving order."""
        texts = list(texts)
        if not texts:
            raise ValueError("embed_batch needs at least one text")
        for i, text in enumerate(texts):
            if not isinstance(text, str) or not text.strip():
                raise ValueError(f"text at position {i} is empty")
        with self._lock:
            self.calls += 1
            self.texts_embedded += len(texts)
        out = np.asarray(self._embed(texts), dtype=np.float64)
        if out.shape != (len(texts), self.dim):
            raise DimensionError(f"provider returned shape {out.shape}, expected ({len(texts)}, {self.dim})")
        if not np.all(np.isfinite(out)):
            raise EmbeddingError("provider returned non-finite values")
        if self.normalize:
            out = np.vstack([_unit(row) for row in out])
        return out

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_documents(self, docs: Sequence[Document]) -> np.ndarray:
        return self.embed_batch([d.text for d in docs])

    def _embed(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError


_WORD_RE = re.compile(r"\w+", re.UNICODE)


class TestHashEmbedder(EmbeddingProvider):
    """Signed feature hashing over lowercase words and character trigrams.

    Texts sharing vocabulary get correlated vectors, which is enough to make
    offline clustering tests meaningful. A tiny per-text fingerprint spread
    over every coordinate keeps distinct strings at distinct vectors even
    when their bucketed features happen to collide.
    """

    kind = "testhash"
    __test__ = False  # not a pytest class

    def __init__(
        self,
        dim: int = 256,
        normalize: bool = True,
        trigram_weight: float = 0.5,
        fingerprint_scale: float = 1e-6,
    ) -> None:
        super().__init__(dim, normalize)
        self.trigram_weight = trigram_weight
        self.fingerprint_scale = fingerprint_scale

    def describe(self) -> dict:
        return {**super().describe(), "trigram_weight": self.trigram_weight}

    def _bucket(self, feature: str) -> tuple[int, float]:
        h = int.from_bytes(hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest(), "little")
        return h % self.dim, (1.0 if (h >> 63) & 1 else -1.0)

    def features(self, text: str) -> Iterable[tuple[str, float]]:
        for word in _WORD_RE.findall(text.lower()):
            yield "w:" + word, 1.0
        padded = f" {text} "
        for i in range(len(padded) - 2):
            yield "c:" + padded[i:i + 3], self.trigram_weight

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for feature, weight in self.features(text):
            bucket, sign = self._bucket(feature)
            vec[bucket] += sign * weight
        seed = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
        noise = np.random.Generator(np.random.Philox(int.from_bytes(seed, "little"))).standard_normal(self.dim)
        norm = np.linalg.norm(vec)
        return vec + noise * self.fingerprint_scale * (norm if norm > 0 else 1.0)

    def _embed(self, texts: list[str]) -> np.ndarray:
        return np.vstack([self._vector(t) for t in texts])


def write_store(path: str | Path, pairs: Iterable[tuple[str, Sequence[float]]]) -> int:
    """Write ``(key, vector)`` pairs as a JSON Lines embedding store."""
    dim = None
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for key, vector in pairs:
            vec = as_vector(vector)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimensionError(f"store vector for {key!r} has dim {vec.size}, expected {dim}")
            # repr of a Python float round-trips exactly
            fh.write(json.dumps({"key": key, "vector": [float(v) for v in vec]}) + "\n")
            count += 1
    return count


def read_store(path: str | Path) -> dict[str, np.ndarray]:
    store: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key, vec = rec["key"], as_vector(rec["vector"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed store record ({exc})") from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimensionError(f"{path}:{lineno}: vector dim {vec.size}, expected {dim}")
            store[key] = vec
    return store


class FileStoreEmbedder(EmbeddingProvider):
    """Precomputed vectors keyed by document id or by ``content_key(text)``.

    ``embed_documents`` looks documents up by id first and by content key
    second; ``embed_batch`` only has the text and uses the content key. An
    optional ``adhoc`` provider embeds texts the store cannot (e.g. novel
    summaries); without it such texts raise ``EmbeddingLookupError``.
    """

    kind = "filestore"

    def __init__(
        self,
        store: dict[str, np.ndarray] | str | Path,
        normalize: bool = True,
        adhoc: Optional[EmbeddingProvider] = None,
        source: str = "",
    ) -> None:
        if not isinstance(store, dict):
            source = str(store)
            store = read_store(store)
        if not store:
            raise ValueError("embedding store is empty")
        dim = next(iter(store.values())).size
        super().__init__(dim, normalize)
        self.store = store
        self.source = source
        if adhoc is not None and adhoc.dim != dim:
            raise DimensionError(f"adhoc provider dim {adhoc.dim} differs from store dim {dim}")
        self.adhoc = adhoc

    def describe(self) -> dict:
        out = {**super().describe(), "source": self.source, "size": len(self.store)}
        if self.adhoc is not None:
            out["adhoc"] = self.adhoc.describe()
        return out

    def can_embed(self, text: str) -> bool:
        return self.adhoc is not None or content_key(text) in self.store

    def _lookup(self, keys: list[str], texts: list[str]) -> np.ndarray:
        rows = []
        for key, text in zip(keys, texts):
            vec = self.store.get(key)
            if vec is None:
                vec = self.store.get(content_key(text))
            if vec is None:
                if self.adhoc is None:
                    raise EmbeddingLookupError(f"no stored vector for {key!r}")
                vec = self.adhoc.embed_one(text)
            rows.append(vec)
        return np.vstack(rows)

    def _embed(self, texts: list[str]) -> np.ndarray:
        return self._lookup([content_key(t) for t in texts], texts)

    def embed_documents(self, docs: Sequence[Document]) -> np.ndarray:
        if not docs:
            raise ValueError("embed_documents needs at least one document")
        with self._lock:
            self.calls += 1
            self.texts_embedded += len(docs)
        out = self._lookup([d.id for d in docs], [d.text for d in docs])
        if self.normalize:
            out = np.vstack([_unit(row) for row in out])
        return out


@dataclass
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 0.5

    def delay(self, attempt: int) -> float:
        return self.base_delay * (2 ** (attempt - 1))


class RemoteEmbedder(EmbeddingProvider):
    """Client for an OpenAI-style ``/embeddings`` endpoint.

    Requests are split into ``batch_size`` chunks, issued with at most
    ``max_in_flight`` concurrent requests, and reassembled in input order.
    Results are cached per text so repeated texts cost nothing.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        batch_size: int = 64,
        normalize: bool = True,
        max_in_flight: int = 4,
        retry: Optional[RetryPolicy] = None,
        timeout: float = 60.0,
        api_key: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        super().__init__(dim, normalize)
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.endpoint = endpoint
        self.model = model
        self.batch_size = batch_size
        self.max_in_flight = max(1, max_in_flight)
        self.retry = retry or RetryPolicy()
        self._sleep = sleep
        key = api_key if api_key is not None else os.environ.get(EMBED_API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._cache: dict[str, np.ndarray] = {}
        self.requests = 0

    def describe(self) -> dict:
        return {**super().describe(), "endpoint": self.endpoint, "model": self.model}

    def close(self) -> None:
        self._client.close()

    def _post(self, chunk: list[str]) -> np.ndarray:
        payload = {"model": self.model, "input": chunk}
        last_exc: Exception | None = None
        for attempt in range(1, self.retry.attempts + 1):
            try:
                with self._lock:
                    self.requests += 1
                resp = self._client.post(self.endpoint, json=payload)
                resp.raise_for_status()
                data = resp.json()["data"]
                rows: list[Optional[np.ndarray]] = [None] * len(chunk)
                for item in data:
                    rows[int(item["index"])] = np.asarray(item["embedding"], dtype=np.float64)
            except (httpx.HTTPError, KeyError, ValueError, TypeError, IndexError) as exc:
                last_exc = exc
                logger.warning("embedding request failed (attempt %d/%d): %s", attempt, self.retry.attempts, exc)
                if attempt < self.retry.attempts:
                    self._sleep(self.retry.delay(attempt))
                continue
            if any(r is None for r in rows):
                raise EmbeddingError("embedding response is missing indices")
            for r in rows:
                if r.size != self.dim:
                    raise DimensionError(f"remote returned dim {r.size}, expected {self.dim}")
            return np.vstack(rows)
        raise EmbeddingError(f"embedding request failed after {self.retry.attempts} attempts: {last_exc}")

    def _embed(self, texts: list[str]) -> np.ndarray:
        with self._lock:
            missing = list(dict.fromkeys(t for t in texts if t not in self._cache))
        chunks = [missing[i:i + self.batch_size] for i in range(0, len(missing), self.batch_size)]
        if chunks:
            with ThreadPoolExecutor(max_workers=min(self.max_in_flight, len(chunks))) as pool:
                results = list(pool.map(self._post, chunks))
            with self._lock:
                for chunk, vecs in zip(chunks, results):
                    for text, vec in zip(chunk, vecs):
                        self._cache[text] = vec
        return np.vstack([self._cache[t] for t in texts])


def provider_from_string(
    spec: str,
    dim: Optional[int] = None,
    model: str = "text-embedding-3-small",
    batch_size: int = 64,
    normalize: bool = True,
) -> EmbeddingProvider:
    """Build a provider from ``testhash``, ``file:PATH`` or ``remote:URL``."""
    if spec == "testhash":
        return TestHashEmbedder(dim=dim or 256, normalize=normalize)
    if spec.startswith("file:"):
        store = FileStoreEmbedder(spec[5:], normalize=normalize)
        if dim is not None and dim != store.dim:
            raise DimensionError(f"--dim {dim} does not match store dim {store.dim}")
        return store
    if spec.startswith("remote:"):
        if dim is None:
            raise ValueError("remote provider needs an explicit dim")
        return RemoteEmbedder(spec[7:], model=model, dim=dim, batch_size=batch_size, normalize=normalize)
    raise ValueError(f"unknown provider {spec!r}; expected testhash, file:PATH or remote:URL")
