"""Small labelled corpora with disjoint topic vocabularies, for offline runs."""

from __future__ import annotations

import numpy as np

from .types import Document

TOPICS: dict[str, list[str]] = {
    "banking": [
        "account", "transfer", "card", "balance", "deposit", "withdrawal", "pin", "overdraft",
        "statement", "interest", "loan", "mortgage", "cheque", "atm", "refund", "fee",
    ],
    "cooking": [
        "recipe", "oven", "flour", "garlic", "simmer", "saucepan", "butter", "dough",
        "onion", "roast", "spices", "broth", "whisk", "skillet", "pastry", "marinade",
    ],
    "astronomy": [
        "telescope", "galaxy", "nebula", "orbit", "comet", "eclipse", "asteroid", "planet",
        "supernova", "quasar", "meteor", "constellation", "lunar", "solar", "redshift", "pulsar",
    ],
    "gardening": [
        "compost", "seedling", "soil", "pruning", "mulch", "tomato", "watering", "fertilizer",
        "weeds", "greenhouse", "roses", "shrub", "bulbs", "trowel", "perennial", "hedge",
    ],
    "football": [
        "goalkeeper", "striker", "penalty", "offside", "referee", "midfield", "tackle", "league",
        "stadium", "corner", "header", "dribble", "defender", "match", "coach", "goal",
    ],
    "networking": [
        "router", "firewall", "packet", "subnet", "latency", "ethernet", "dns", "gateway",
        "bandwidth", "switch", "vpn", "protocol", "wifi", "port", "modem", "ping",
    ],
    "music": [
        "guitar", "chord", "melody", "tempo", "drums", "piano", "rhythm", "orchestra",
        "violin", "scale", "lyrics", "album", "bass", "harmony", "concert", "song",
    ],
}

TEMPLATES = [
    "{0} {1} and {2} with the {3}.",
    "How is the {0} {1} {2} {3}?",
    "{0} or {1} for a {2} {3}?",
    "The {0} {1} {2} {3}.",
    "Need {0} {1} {2} and {3}!",
]


def synthetic_corpus(
    n_topics: int = 5,
    docs_per_topic: int = 60,
    seed: int = 0,
    sentences: tuple[int, int] = (2, 4),
    timestamps: bool = True,
) -> list[Document]:
    """Generate ``n_topics * docs_per_topic`` labelled documents.

    Each document is 2-4 short templated sentences of four topic words each; the few
    connective template words are shared by all topics.
    Documents are interleaved across topics and timestamped in order.
    """
    if not 1 <= n_topics <= len(TOPICS):
        raise ValueError(f"n_topics must be between 1 and {len(TOPICS)}")
    names = list(TOPICS)[:n_topics]
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(docs_per_topic):
        for topic in names:
            vocab = TOPICS[topic]
            parts = []
            for _ in range(int(rng.integers(sentences[0], sentences[1] + 1))):
                template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
                words = rng.choice(vocab, size=4, replace=False)
                sentence = template.format(*words)
                parts.append(sentence[0].upper() + sentence[1:])
            idx = len(docs)
            docs.append(
                Document(
                    id=f"{topic}-{i:04d}",
                    text=" ".join(parts),
                    label=topic,
                    timestamp=1_600_000_000 + idx if timestamps else None,
                )
            )
    return docs
