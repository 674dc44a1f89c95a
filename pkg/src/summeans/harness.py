"""Experiment orchestration: corpora, configs, seed loops and report files."""

from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np

from .embeddings import EmbeddingProvider, provider_from_string
from .llm import ChatClient, client_from_string
from .metrics import acc, centroid_dist, label_centroids, nmi
from .minibatch import StreamState, run_stream, split_batches
from .summary_kmeans import build_summarizer, run_summary_kmeans
from .types import (
    Document,
    RngState,
    RunReport,
    Schedule,
    SummarizerKind,
    SummarizerSpec,
    SummaryEvent,
    check_unique_ids,
    digest,
)

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    pass


def load_corpus(path: str | Path) -> list[Document]:
    """Read a JSON Lines corpus: ``{"id", "text", "label"?, "timestamp"?}`` per line."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                if "id" not in rec or "text" not in rec:
                    raise ValueError("missing 'id' or 'text'")
                label = rec.get("label")
                ts = rec.get("timestamp")
                doc = Document(
                    id=str(rec["id"]),
                    text=rec["text"],
                    label=None if label is None else str(label),
                    timestamp=None if ts is None else int(ts),
                )
            except (ValueError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if doc.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    if not docs:
        raise CorpusError(f"{path}: corpus is empty")
    return docs


def write_corpus(path: str | Path, docs: Sequence[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            rec: dict[str, Any] = {"id": d.id, "text": d.text}
            if d.label is not None:
                rec["label"] = d.label
            if d.timestamp is not None:
                rec["timestamp"] = d.timestamp
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def corpus_digest(docs: Sequence[Document]) -> str:
    return digest([[d.id, d.text] for d in docs])


class EmbeddingCache:
    """Embeds each (provider, corpus) pair once per process."""

    def __init__(self) -> None:
        self._store: dict[tuple[str, str], np.ndarray] = {}
        self.misses = 0

    def get(self, provider: EmbeddingProvider, docs: Sequence[Document]) -> np.ndarray:
        key = (digest(provider.describe()), corpus_digest(docs))
        if key not in self._store:
            self.misses += 1
            self._store[key] = provider.embed_documents(docs)
        return self._store[key]


@dataclass
class ExperimentConfig:
    dataset_path: Optional[str] = None
    provider: str = "testhash"
    dim: Optional[int] = None
    embed_model: str = "text-embedding-3-small"
    normalize: bool = True
    summarizer: SummarizerSpec = field(default_factory=SummarizerSpec)
    llm: str = "mock-echo"
    llm_model: str = "gpt-4o"
    k: Union[int, str] = "from-labels"
    schedule: Schedule = field(default_factory=Schedule)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    mode: str = "static"
    stream_target_batch: int = 10000
    output_dir: Optional[str] = None
    max_workers: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.mode not in ("static", "stream"):
            raise ValueError("mode must be 'static' or 'stream'")
        if isinstance(self.k, str) and self.k != "from-labels":
            self.k = int(self.k)
        if isinstance(self.k, int) and self.k < 1:
            raise ValueError("k must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        """Everything that affects results. Seeds and the output directory are excluded."""
        return {
            "dataset_path": self.dataset_path,
            "provider": self.provider,
            "dim": self.dim,
            "embed_model": self.embed_model,
            "normalize": self.normalize,
            "summarizer": self.summarizer.to_dict(),
            "llm": self.llm if self.summarizer.kind is SummarizerKind.LLM else None,
            "llm_model": self.llm_model if self.summarizer.kind is SummarizerKind.LLM else None,
            "k": self.k,
            "schedule": {"T": self.schedule.T, "l": self.schedule.l},
            "mode": self.mode,
            "stream_target_batch": self.stream_target_batch if self.mode == "stream" else None,
        }

    @property
    def digest(self) -> str:
        return digest(self.to_dict())


def resolve_k(k: Union[int, str], docs: Sequence[Document]) -> int:
    if isinstance(k, int):
        return k
    labels = {d.label for d in docs if d.label is not None}
    if not labels:
        raise ValueError("k='from-labels' needs a labelled corpus; pass an explicit k")
    return len(labels)


def evaluate(
    docs: Sequence[Document],
    points: np.ndarray,
    assignments: Sequence[int],
    centroids: Optional[np.ndarray] = None,
) -> Optional[dict[str, Any]]:
    """ACC/NMI (and dist when k equals the label count) on labelled documents."""
    labelled = [i for i, d in enumerate(docs) if d.label is not None]
    if not labelled:
        return None
    y_true = [docs[i].label for i in labelled]
    y_pred = [int(assignments[i]) for i in labelled]
    out: dict[str, Any] = {"acc": acc(y_true, y_pred), "nmi": nmi(y_true, y_pred), "dist": None}
    if centroids is not None:
        _, truth = label_centroids(np.asarray(points)[labelled], y_true)
        if truth.shape[0] == np.asarray(centroids).shape[0]:
            out["dist"] = centroid_dist(centroids, truth)
    return out


def metrics_payload(metrics: Optional[dict[str, Any]], seed: int, config_digest: str) -> dict[str, Any]:
    metrics = metrics or {}
    return {
        "acc": metrics.get("acc"),
        "nmi": metrics.get("nmi"),
        "dist": metrics.get("dist"),
        "seed": seed,
        "config_digest": config_digest,
    }


def render_metrics_json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _events_of(source: Union[RunReport, StreamState, Sequence[SummaryEvent]]) -> list[SummaryEvent]:
    if isinstance(source, StreamState):
        return [e for r in source.batch_reports for e in r.summary_events]
    if isinstance(source, RunReport):
        return list(source.summary_events)
    return list(source)


def drift_report(source: Union[RunReport, StreamState, Sequence[SummaryEvent]], k: Optional[int] = None) -> str:
    """Per cluster, the chronological list of its textual centroids."""
    events = [e for e in _events_of(source) if e.text]
    if not events:
        return "no textual centroids: this run produced no summary events\n"
    if k is None:
        k = 1 + max(e.cluster for e in events)
    batched = any(e.batch is not None for e in events)
    lines = []
    for j in range(k):
        lines.append(f"== cluster {j} ==")
        mine = sorted(
            (e for e in events if e.cluster == j),
            key=lambda e: (e.batch if e.batch is not None else -1, e.iteration),
        )
        if not mine:
            lines.append("  (no summaries)")
        for e in mine:
            where = f"batch {e.batch} iter {e.iteration}" if batched else f"iter {e.iteration}"
            flag = " [fallback]" if e.fallback else ""
            lines.append(f"  [{where}]{flag} {' '.join(e.text.split())}")
        lines.append("")
    return "\n".join(lines)


def emit_drift_report(source: Union[RunReport, StreamState], path: str | Path, k: Optional[int] = None) -> str:
    text = drift_report(source, k)
    Path(path).write_text(text, encoding="utf-8")
    return text


def drift_report_from_json(report: dict[str, Any]) -> str:
    """Rebuild a drift report from a saved run report (``report_seed*.json``)."""
    runs = report["batches"] if "batches" in report else [report]
    events = [
        SummaryEvent(
            iteration=e["iteration"],
            cluster=e["cluster"],
            text=e.get("text"),
            method=e.get("method", ""),
            fallback=e.get("fallback", False),
            batch=e.get("batch"),
        )
        for run in runs
        for e in run["summary_events"]
    ]
    return drift_report(events, report.get("k"))


@dataclass
class SeedResult:
    seed: int
    metrics: Optional[dict[str, Any]]
    paths: dict[str, str] = field(default_factory=dict)
    error: Optional[str] = None
    report: Optional[Union[RunReport, StreamState]] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def summarize_seeds(results: Sequence[SeedResult]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of each metric across seeds."""
    out = {}
    for name in ("acc", "nmi", "dist"):
        vals = [r.metrics[name] for r in results if r.ok and r.metrics and r.metrics.get(name) is not None]
        if vals:
            std = statistics.stdev(vals) if len(vals) > 1 else 0.0
            out[name] = (statistics.fmean(vals), std)
    return out


def format_summary(summary: dict[str, tuple[float, float]]) -> str:
    if not summary:
        return "no metrics (unlabelled corpus)"
    return "  ".join(f"{name.upper()} {m:.4f} ({s:.4f})" for name, (m, s) in summary.items())


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_prompts(path: Path, events: Sequence[SummaryEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            if e.prompt is not None:
                rec = {"iteration": e.iteration, "cluster": e.cluster, "batch": e.batch, **e.prompt.to_dict()}
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


class Experiment:
    """Runs one configuration over its seeds, sharing embeddings between them."""

    def __init__(
        self,
        config: ExperimentConfig,
        docs: Optional[Sequence[Document]] = None,
        provider: Optional[EmbeddingProvider] = None,
        client: Optional[ChatClient] = None,
        cache: Optional[EmbeddingCache] = None,
    ) -> None:
        self.config = config
        if docs is None:
            if config.dataset_path is None:
                raise ValueError("config has no dataset_path and no documents were given")
            docs = load_corpus(config.dataset_path)
        check_unique_ids(docs)
        self.docs = list(docs)
        self.provider = provider or provider_from_string(
            config.provider, config.dim, model=config.embed_model, normalize=config.normalize
        )
        self.client = client
        if self.client is None and config.summarizer.kind is SummarizerKind.LLM:
            self.client = client_from_string(config.llm, model=config.llm_model)
        self.cache = cache or EmbeddingCache()
        self.k = resolve_k(config.k, self.docs)

    def _run_static(self, seed: int) -> tuple[RunReport, np.ndarray, np.ndarray]:
        points = self.cache.get(self.provider, self.docs)
        summarizer = build_summarizer(self.config.summarizer, self.provider, self.client)
        state, report = run_summary_kmeans(
            self.docs, points, self.k, summarizer, self.config.schedule, RngState(seed),
            max_workers=self.config.max_workers,
        )
        return report, state.assignments, state.centroids

    def _run_stream(self, seed: int, out: Optional[Path]) -> tuple[StreamState, np.ndarray, np.ndarray]:
        batches = split_batches(self.docs, self.config.stream_target_batch)
        embedded = [(b, self.cache.get(self.provider, b)) for b in batches]
        summarizer = build_summarizer(self.config.summarizer, self.provider, self.client)
        ckpt = out / f"checkpoint_seed{seed}.json" if out is not None else None
        stream = run_stream(
            embedded, self.k, summarizer, self.config.schedule, RngState(seed),
            checkpoint_path=ckpt, max_workers=self.config.max_workers,
        )
        # every document is labelled by the cluster it joined within its batch
        order = {d.id: i for i, d in enumerate(self.docs)}
        assignments = np.zeros(len(self.docs), dtype=np.int64)
        for (batch, _), report in zip(embedded, stream.batch_reports):
            for d, a in zip(batch, report.final_state.assignments):
                assignments[order[d.id]] = a
        return stream, assignments, stream.centroids

    def run_seed(self, seed: int) -> SeedResult:
        cfg = self.config
        out = Path(cfg.output_dir) if cfg.output_dir else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        if cfg.mode == "static":
            report, assignments, centroids = self._run_static(seed)
            events = report.summary_events
            report_payload: dict[str, Any] = {"k": self.k, **report.to_dict()}
        else:
            report, assignments, centroids = self._run_stream(seed, out)
            events = _events_of(report)
            report_payload = {
                "k": self.k,
                "seed": seed,
                "centroids": report.centroids.tolist(),
                "cumulative_counts": report.cumulative_counts.tolist(),
                "batches": [r.to_dict() for r in report.batch_reports],
            }
        points = self.cache.get(self.provider, self.docs)
        metrics = evaluate(self.docs, points, assignments, centroids)
        payload = metrics_payload(metrics, seed, cfg.digest)
        result = SeedResult(seed, metrics if metrics else None, report=report)
        if out is not None:
            paths = {
                "metrics": out / f"metrics_seed{seed}.json",
                "drift": out / f"drift_seed{seed}.txt",
                "prompts": out / f"prompts_seed{seed}.jsonl",
                "report": out / f"report_seed{seed}.json",
                "assignments": out / f"assignments_seed{seed}.json",
            }
            if metrics is not None:
                paths["metrics"].write_text(render_metrics_json(payload), encoding="utf-8")
            else:
                del paths["metrics"]
            emit_drift_report(report, paths["drift"], self.k)
            _write_prompts(paths["prompts"], events)
            _write_json(paths["report"], {"config_digest": cfg.digest, **report_payload})
            _write_json(
                paths["assignments"],
                {"config_digest": cfg.digest, "seed": seed,
                 "assignments": {d.id: int(a) for d, a in zip(self.docs, assignments)}},
            )
            if cfg.mode == "stream":
                paths["checkpoint"] = out / f"checkpoint_seed{seed}.json"
            result.paths = {name: str(p) for name, p in paths.items()}
        return result

    def run(self) -> list[SeedResult]:
        results = []
        for seed in self.config.seeds:
            try:
                results.append(self.run_seed(seed))
            except Exception as exc:  # noqa: BLE001 - record and continue with the next seed
                logger.exception("seed %d failed", seed)
                results.append(SeedResult(seed, None, error=f"{type(exc).__name__}: {exc}"))
        return results


def run_experiment(
    config: ExperimentConfig,
    docs: Optional[Sequence[Document]] = None,
    provider: Optional[EmbeddingProvider] = None,
    client: Optional[ChatClient] = None,
    cache: Optional[EmbeddingCache] = None,
) -> list[SeedResult]:
    return Experiment(config, docs, provider, client, cache).run()


def scaled_k(k: int, delta: float) -> int:
    """round(k * (1 + delta)) with halves rounded up, computed in decimal.

    Binary floats would turn 5 * (1 - 0.9) into 0.4999... and round it to 0.
    """
    exact = Decimal(k) * (1 + Decimal(str(delta)))
    return int(exact.to_integral_value(rounding=ROUND_HALF_UP))


def sweep_k(
    config: ExperimentConfig,
    deltas: Sequence[float] = (-0.2, -0.1, 0.0, 0.1, 0.2),
    docs: Optional[Sequence[Document]] = None,
    provider: Optional[EmbeddingProvider] = None,
    client: Optional[ChatClient] = None,
    variants: Optional[dict[str, SummarizerSpec]] = None,
) -> tuple[list[dict[str, Any]], str]:
    """Re-run the experiment at k' = round(k * (1 + delta)) for each delta.

    Returns the rows and a plain-text table with one row group per variant
    and ACC/NMI columns.
    """
    if docs is None:
        if config.dataset_path is None:
            raise ValueError("config has no dataset_path and no documents were given")
        docs = load_corpus(config.dataset_path)
    if not any(d.label is not None for d in docs):
        raise ValueError("sweep-k needs a labelled corpus")
    base_k = config.k if isinstance(config.k, int) else resolve_k(config.k, docs)
    variants = variants or {config.summarizer.kind.value: config.summarizer}
    cache = EmbeddingCache()
    rows: list[dict[str, Any]] = []
    notices = []
    for name, spec in variants.items():
        for delta in deltas:
            k_prime = scaled_k(base_k, delta)
            if k_prime < 1:
                notices.append(f"skipped delta={delta:+.0%}: k'={k_prime} < 1")
                continue
            out_dir = None
            if config.output_dir:
                out_dir = str(Path(config.output_dir) / f"{name}_k{k_prime}")
            cfg = replace(config, k=k_prime, summarizer=spec, output_dir=out_dir)
            results = run_experiment(cfg, docs, provider, client, cache)
            summary = summarize_seeds(results)
            rows.append({"variant": name, "delta": delta, "k": k_prime, "summary": summary,
                         "failed_seeds": [r.seed for r in results if not r.ok]})
    return rows, format_sweep_table(rows, deltas, notices)


def format_sweep_table(rows: Sequence[dict[str, Any]], deltas: Sequence[float], notices: Sequence[str] = ()) -> str:
    header = ["variant", "metric"] + [("k" if d == 0 else f"k{d:+.0%}") for d in deltas]
    lines = [" | ".join(header)]
    variants = list(dict.fromkeys(r["variant"] for r in rows))
    for v in variants:
        mine = {r["delta"]: r for r in rows if r["variant"] == v}
        for metric in ("acc", "nmi"):
            cells = [v, metric.upper()]
            for d in deltas:
                r = mine.get(d)
                if r is None or metric not in r["summary"]:
                    cells.append("-")
                else:
                    m, s = r["summary"][metric]
                    cells.append(f"{m:.4f} ({s:.4f})")
            lines.append(" | ".join(cells))
    lines.extend(f"note: {n}" for n in notices)
    return "\n".join(lines) + "\n"

