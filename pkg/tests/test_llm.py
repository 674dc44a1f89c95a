import json

import httpx
import numpy as np
import pytest

from summeans.embeddings import TestHashEmbedder
from summeans.llm import (
    BANK77_INSTRUCTION,
    ConcatFirstSentencesClient,
    CountingClient,
    EchoMedoidClient,
    LLMError,
    RemoteChatClient,
    build_prompt,
    client_from_string,
    llm_centroid,
    sample_representatives,
)
from summeans.types import Document


def test_sample_caps_at_cluster_size():
    emb = np.random.default_rng(0).normal(size=(3, 2))
    for strategy in ["kmeanspp", "random", "centroid", "edge"]:
        got = sample_representatives(emb, [10, 11, 12], 10, strategy, np.random.default_rng(0))
        assert sorted(got) == [10, 11, 12]


def test_sample_nearest_and_farthest_on_a_line():
    emb = np.array([[0.0], [1.0], [2.0], [3.0], [4.0], [10.0]])  # mean 10/3
    idx = list(range(6))
    near = sample_representatives(emb, idx, 6, "centroid", np.random.default_rng(0))
    d = np.abs(emb[:, 0] - emb.mean())
    assert near == sorted(idx, key=lambda i: (d[i], i))
    far = sample_representatives(emb, idx, 2, "edge", np.random.default_rng(0))
    assert far == [5, 0]


def test_sample_ties_by_lower_position():
    emb = np.array([[-1.0], [1.0], [0.0]])
    assert sample_representatives(emb, [7, 8, 9], 2, "edge", np.random.default_rng(0)) == [7, 8]


@pytest.mark.parametrize("strategy", ["kmeanspp", "random", "centroid", "edge"])
def test_sample_no_duplicates(strategy):
    rng = np.random.default_rng(4)
    emb = np.vstack([rng.normal(size=(10, 3)), np.zeros((10, 3))])  # many duplicate rows
    for seed in range(50):
        got = sample_representatives(emb, list(range(100, 120)), 15, strategy, np.random.default_rng(seed))
        assert len(got) == len(set(got)) == 15
        assert set(got) <= set(range(100, 120))


def test_kmeanspp_sampling_covers_two_blobs():
    rng = np.random.default_rng(1)
    emb = np.vstack([rng.normal(scale=0.01, size=(15, 2)), rng.normal(scale=0.01, size=(15, 2)) + 50])
    hits = 0
    for seed in range(1000):
        a, b = sample_representatives(emb, list(range(30)), 2, "kmeanspp", np.random.default_rng(seed))
        hits += (a < 15) != (b < 15)
    assert hits / 1000 >= 0.99


def test_build_prompt_format():
    assert build_prompt("Summarize.", [Document("a", "hello there")]) == "Summarize.\n\n1. hello there"
    prompt = build_prompt("I", [Document("x", "second"), Document("y", "first\nline")])
    assert prompt == "I\n\n1. second\n2. first line"
    with pytest.raises(ValueError):
        build_prompt("I", [])


def test_bank77_instruction_text():
    assert BANK77_INSTRUCTION == (
        "The following is a cluster of online banking questions. "
        "Write a single question that represents the cluster concisely."
    )


def _cluster(n=6):
    docs = [Document(f"d{i}", f"Question {i} about my card. Extra detail {i}.") for i in range(n)]
    emb = TestHashEmbedder(32)
    return docs, emb.embed_documents(docs), emb


def test_echo_medoid_centroid():
    docs, points, emb = _cluster()
    out = llm_centroid(docs, points, emb, EchoMedoidClient(), "I", 3, "kmeanspp", np.random.default_rng(0))
    sampled = [int(i[1:]) for i in out.record.sampled_doc_ids]
    mean = points.mean(axis=0)
    nearest = min(sampled, key=lambda i: (((points[i] - mean) ** 2).sum(), i))
    np.testing.assert_array_equal(out.vector, emb.embed_one(docs[nearest].text))
    assert out.record.response == docs[nearest].text
    assert out.record.rendered_prompt.startswith("I\n\n1. ")


class _Fixed:
    def __init__(self, answer=None, exc=None):
        self.answer, self.exc = answer, exc

    def complete(self, prompt, context=None):
        if self.exc:
            raise self.exc
        return self.answer


@pytest.mark.parametrize("client, note", [(_Fixed(""), "empty"), (_Fixed(exc=LLMError("down")), "down")])
def test_llm_failures_flag_fallback(client, note):
    docs, points, emb = _cluster()
    out = llm_centroid(docs, points, emb, client, "I", 3, "random", np.random.default_rng(0))
    assert out.vector is None and out.fallback and note in out.note


def test_concat_first_sentences():
    docs, points, emb = _cluster(2)
    out = llm_centroid(docs, points, emb, ConcatFirstSentencesClient(), "I", 5, "centroid",
                       np.random.default_rng(0))
    assert out.text.count("Question") == 2 and "Extra" not in out.text


def test_counting_client():
    c = CountingClient(EchoMedoidClient())
    docs, points, emb = _cluster()
    for _ in range(3):
        llm_centroid(docs, points, emb, c, "I", 2, "random", np.random.default_rng(0))
    assert c.calls == 3


def test_remote_chat_wire_format():
    seen = []

    def handler(request):
        seen.append((json.loads(request.content), request.headers.get("authorization")))
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": "A summary."}}]})

    client = RemoteChatClient("http://llm.test/v1/chat/completions", "model-x", api_key="k",
                              transport=httpx.MockTransport(handler))
    assert client.complete("prompt text") == "A summary."
    body, auth = seen[0]
    assert body["model"] == "model-x"
    assert body["messages"] == [{"role": "user", "content": "prompt text"}]
    assert body["temperature"] == 0.0
    assert auth == "Bearer k"


def test_remote_chat_env_key_and_retries(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "envkey")
    attempts = []

    def handler(request):
        attempts.append(request.headers.get("authorization"))
        return httpx.Response(500)

    client = RemoteChatClient("http://llm/", "m", retries=2, transport=httpx.MockTransport(handler),
                              sleep=lambda s: None)
    with pytest.raises(LLMError, match="3 attempts"):
        client.complete("p")
    assert attempts == ["Bearer envkey"] * 3


def test_client_from_string():
    assert isinstance(client_from_string("mock-echo"), EchoMedoidClient)
    assert isinstance(client_from_string("remote:http://x/"), RemoteChatClient)
    with pytest.raises(ValueError):
        client_from_string("nope")
