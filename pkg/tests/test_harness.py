import json

import pytest

from summeans.embeddings import TestHashEmbedder
from summeans.harness import (
    CorpusError,
    EmbeddingCache,
    ExperimentConfig,
    drift_report,
    drift_report_from_json,
    format_sweep_table,
    load_corpus,
    resolve_k,
    scaled_k,
    run_experiment,
    summarize_seeds,
    SeedResult,
    sweep_k,
    write_corpus,
)
from summeans.summary_kmeans import MeanEchoSummarizer, run_summary_kmeans
from summeans.synthetic import synthetic_corpus
from summeans.types import Document, NLPMethod, RngState, Schedule, SummarizerKind, SummarizerSpec

LSA = SummarizerSpec(kind=SummarizerKind.NLP, nlp_method=NLPMethod.LSA, q=2)


@pytest.fixture(scope="module")
def small():
    return synthetic_corpus(3, 12, seed=0)


def _config(**kw):
    base = dict(provider="testhash", dim=64, summarizer=LSA, schedule=Schedule(6, 3), seeds=[1, 2])
    base.update(kw)
    return ExperimentConfig(**base)


def test_load_corpus_roundtrip(tmp_path, small):
    path = tmp_path / "c.jsonl"
    write_corpus(path, small)
    assert load_corpus(path) == small


def test_load_corpus_reports_line_of_missing_text(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "fine"}\n{"id": "b"}\n')
    with pytest.raises(CorpusError, match=r"\.jsonl:2:"):
        load_corpus(path)


def test_load_corpus_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path)


def test_load_corpus_rejects_bad_json(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "text": "x"}\nnot json\n')
    with pytest.raises(CorpusError, match=r"\.jsonl:2:"):
        load_corpus(path)


def test_resolve_k(small):
    assert resolve_k("from-labels", small) == 3
    assert resolve_k(7, small) == 7
    with pytest.raises(ValueError):
        resolve_k("from-labels", [Document("a", "x")])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=[])
    with pytest.raises(ValueError):
        ExperimentConfig(mode="batch")
    assert ExperimentConfig(k="4").k == 4
    a, b = _config(seeds=[0]), _config(seeds=[5], output_dir="/tmp/x")
    assert a.digest == b.digest
    assert a.digest != _config(k=4).digest


def test_static_experiment_is_deterministic(tmp_path, small):
    cfg = _config(output_dir=str(tmp_path / "a"))
    r1 = run_experiment(cfg, small)
    r2 = run_experiment(_config(output_dir=str(tmp_path / "b")), small)
    assert [r.ok for r in r1] == [True, True]
    for x, y in zip(r1, r2):
        assert x.metrics == y.metrics
        for name in ("metrics", "drift", "report", "assignments"):
            assert open(x.paths[name]).read() == open(y.paths[name]).read()
    payload = json.loads(open(r1[0].paths["metrics"]).read())
    assert set(payload) == {"acc", "nmi", "dist", "seed", "config_digest"}
    assert payload["seed"] == 1 and payload["config_digest"] == cfg.digest


def test_embeddings_are_computed_once_across_seeds(small):
    cache = EmbeddingCache()
    provider = TestHashEmbedder(32)
    run_experiment(_config(seeds=[0, 1, 2]), small, provider=provider, cache=cache)
    assert cache.misses == 1
    # corpus once, then per cluster per summary step: sentence pool + summary text
    assert provider.calls == 1 + 3 * 2 * 3 * 2


def test_unlabelled_stream_skips_metrics_but_logs_drift(tmp_path, small):
    docs = [Document(d.id, d.text, None, d.timestamp) for d in small]
    cfg = _config(mode="stream", k=3, stream_target_batch=12, seeds=[0], output_dir=str(tmp_path))
    (res,) = run_experiment(cfg, docs)
    assert res.ok and res.metrics is None
    assert "metrics" not in res.paths
    drift = open(res.paths["drift"]).read()
    assert "[batch 2 iter 6]" in drift
    assert (tmp_path / "checkpoint_seed0.json").exists()


def test_seed_failure_is_recorded_and_others_continue(small):
    class Boom(TestHashEmbedder):
        def embed_batch(self, texts):
            if len(texts) < len(small):
                raise RuntimeError("nope")
            return super().embed_batch(texts)

    results = run_experiment(_config(seeds=[0, 1]), small, provider=Boom(32))
    # summaries fall back per cluster, so the runs themselves survive
    assert all(r.ok for r in results)

    results = run_experiment(_config(seeds=[0, 1], k=100), small)
    assert [r.ok for r in results] == [False, False]
    assert "ValueError" in results[0].error


def test_drift_report_lists_each_cluster(small):
    emb = TestHashEmbedder(64)
    pts = emb.embed_documents(small)
    from summeans.summary_kmeans import NLPSummarizer

    _, report = run_summary_kmeans(small, pts, 3, NLPSummarizer(emb, "lsa", 2), Schedule(4, 2), RngState(0))
    text = drift_report(report, 3)
    for j in range(3):
        assert f"== cluster {j} ==" in text
    assert text.count("[iter 2]") == 3 and text.count("[iter 4]") == 3
    again = drift_report_from_json({"k": 3, **report.to_dict()})
    assert again == text


def test_drift_report_for_numeric_runs():
    assert drift_report([]).startswith("no textual centroids")
    _, report = run_summary_kmeans([Document("a", "x"), Document("b", "y")], [[0.0], [1.0]], 2,
                                   MeanEchoSummarizer(), Schedule(2, 1), RngState(0))
    assert drift_report(report).startswith("no textual centroids")


def test_summarize_seeds():
    rs = [SeedResult(0, {"acc": 0.5, "nmi": 0.1, "dist": None}), SeedResult(1, {"acc": 0.7, "nmi": 0.3, "dist": None}),
          SeedResult(2, None, error="x")]
    s = summarize_seeds(rs)
    assert s["acc"][0] == pytest.approx(0.6) and s["acc"][1] == pytest.approx(0.1414213562)
    assert "dist" not in s


def test_sweep_k_values_and_table(small):
    rows, table = sweep_k(_config(k=10, seeds=[0]), [-0.2, 0.0, 0.2], small)
    assert [r["k"] for r in rows] == [8, 10, 12]
    lines = table.strip().splitlines()
    assert lines[0] == "variant | metric | k-20% | k | k+20%"
    assert len(lines) == 3


def test_sweep_k_skips_nonpositive(small):
    rows, table = sweep_k(_config(k=5, seeds=[0]), [-0.9, -1.0], small)
    assert [r["k"] for r in rows] == [1]
    assert not rows[0]["failed_seeds"]
    assert "skipped delta=-100%: k'=0 < 1" in table


@pytest.mark.parametrize("k, delta, expected", [(10, -0.2, 8), (10, 0.2, 12), (5, -0.9, 1), (5, 0.1, 6), (77, -0.1, 69)])
def test_scaled_k_rounds_half_up(k, delta, expected):
    assert scaled_k(k, delta) == expected


def test_sweep_table_marks_missing_cells():
    table = format_sweep_table([{"variant": "v", "delta": 0.0, "k": 3, "summary": {"acc": (1.0, 0.0)}}], [0.0, 0.1])
    lines = table.strip().splitlines()
    assert lines[1] == "v | ACC | 1.0000 (0.0000) | -"
    assert lines[2] == "v | NMI | - | -"
