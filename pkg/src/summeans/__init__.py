"""k-means text clustering with summary-as-centroid steps.

Plain k-means, k-NLPmeans (extractive summaries) and k-LLMmeans (LLM
summaries) share one driver, ``run_summary_kmeans``; ``run_stream`` extends
it to chronological mini-batches.
"""

from .embeddings import FileStoreEmbedder, RemoteEmbedder, TestHashEmbedder
from .kmeans import assign, kmeanspp_init, lloyd_step, objective, run_kmeans, update_numeric_centroids
from .metrics import acc, centroid_dist, contingency, hungarian, nmi
from .minibatch import StreamState, merge_centroids, run_stream, split_batches
from .summary_kmeans import build_summarizer, run_summary_kmeans
from .types import (
    ClusterState,
    Document,
    RngState,
    RunReport,
    Schedule,
    SummarizerSpec,
    count_summary_steps,
    cosine_similarity,
    euclidean_dist2,
    mean_vector,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterState",
    "Document",
    "FileStoreEmbedder",
    "RemoteEmbedder",
    "RngState",
    "RunReport",
    "Schedule",
    "StreamState",
    "SummarizerSpec",
    "TestHashEmbedder",
    "acc",
    "assign",
    "build_summarizer",
    "centroid_dist",
    "contingency",
    "cosine_similarity",
    "count_summary_steps",
    "euclidean_dist2",
    "hungarian",
    "kmeanspp_init",
    "lloyd_step",
    "mean_vector",
    "merge_centroids",
    "nmi",
    "objective",
    "run_kmeans",
    "run_stream",
    "run_summary_kmeans",
    "split_batches",
    "update_numeric_centroids",
]
