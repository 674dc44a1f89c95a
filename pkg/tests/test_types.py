import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from summeans.types import (
    ClusterState,
    DimensionError,
    Document,
    RngState,
    Schedule,
    SummarizerSpec,
    cosine_similarity,
    count_summary_steps,
    euclidean_dist2,
    mean_vector,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize(
    "a, b, expected",
    [([0, 0], [0, 0], 0.0), ([1, 0], [0, 1], 2.0), ([3, 4], [0, 0], 25.0)],
)
def test_dist2_examples(a, b, expected):
    assert euclidean_dist2(a, b) == expected


def test_dist2_dimension_mismatch_names_both_dims():
    with pytest.raises(DimensionError, match="2 vs 3"):
        euclidean_dist2([1, 2], [1, 2, 3])


@given(st.integers(1, 8).flatmap(lambda d: st.tuples(arrays(float, d, elements=finite), arrays(float, d, elements=finite))))
def test_dist2_symmetric_and_zero_on_self(pair):
    a, b = pair
    assert euclidean_dist2(a, b) == euclidean_dist2(b, a)
    assert euclidean_dist2(a, a) == 0.0
    assert euclidean_dist2(a, b) >= 0.0


@pytest.mark.parametrize(
    "a, b, expected",
    [([1, 0], [1, 0], 1.0), ([1, 0], [0, 1], 0.0), ([1, 0], [-2, 0], -1.0)],
)
def test_cosine_examples(a, b, expected):
    assert cosine_similarity(a, b) == expected


def test_cosine_zero_norm_is_an_error():
    with pytest.raises(ValueError):
        cosine_similarity([0, 0], [1, 0])


@settings(max_examples=200)
@given(
    arrays(float, 6, elements=st.floats(-100, 100, allow_nan=False)).filter(lambda v: np.linalg.norm(v) > 1e-3),
    st.floats(1e-3, 1e3),
)
def test_cosine_scale_invariant(a, s):
    assert abs(cosine_similarity(a, s * a) - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "points, expected",
    [([[2, 2]], [2, 2]), ([[0, 0], [2, 4]], [1, 2]), ([[1, 1], [1, 1], [4, 4]], [2, 2])],
)
def test_mean_vector_examples(points, expected):
    np.testing.assert_array_equal(mean_vector(points), expected)


def test_mean_vector_empty():
    with pytest.raises(ValueError):
        mean_vector(np.empty((0, 3)))


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=12), st.randoms())
def test_mean_vector_permutation_invariant(pts, rnd):
    # small integers keep every partial sum exact
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    np.testing.assert_array_equal(mean_vector(np.array(pts, float)), mean_vector(np.array(shuffled, float)))


def test_document_rejects_blank_text():
    with pytest.raises(ValueError):
        Document("a", "   ")


def test_cluster_state_counts_and_bounds():
    s = ClusterState(np.zeros((3, 2)), [0, 2, 2, 0, 0])
    assert s.counts.tolist() == [3, 0, 2]
    assert s.counts.sum() == 5
    assert s.summaries == (None, None, None)
    with pytest.raises(ValueError):
        ClusterState(np.zeros((2, 2)), [0, 2])


def test_schedule_and_step_count():
    assert count_summary_steps(Schedule(120, 60)) == 2
    assert count_summary_steps(Schedule(120, 20)) == 6
    assert count_summary_steps(Schedule(5, 7)) == 0
    with pytest.raises(ValueError):
        Schedule(0, 1)


def test_summarizer_spec_validates_budgets():
    with pytest.raises(ValueError):
        SummarizerSpec(q=0)
    with pytest.raises(ValueError):
        SummarizerSpec(m=0)


def test_rng_streams_are_independent_and_reproducible():
    a = RngState(3).stream("init").random(4)
    b = RngState(3).stream("init").random(4)
    c = RngState(3).stream("other").random(4)
    d = RngState(3).child(1).stream("init").random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
