import numpy as np
import pytest

from summeans.kmeans import (
    assign,
    kmeanspp_indices,
    kmeanspp_init,
    lloyd_step,
    objective,
    run_kmeans,
    update_numeric_centroids,
)
from summeans.metrics import acc
from summeans.types import ClusterState, DimensionError, RngState


def test_kmeanspp_single_point():
    p = np.array([[1.5, -2.0]])
    np.testing.assert_array_equal(kmeanspp_init(p, 1, np.random.default_rng(0)), p)


def test_kmeanspp_exhaustion_is_a_permutation():
    pts = np.arange(12, dtype=float).reshape(6, 2)
    idx = kmeanspp_indices(pts, 6, np.random.default_rng(1))
    assert sorted(idx) == list(range(6))


def test_kmeanspp_rejects_k_above_distinct():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="distinct"):
        kmeanspp_init(pts, 3, np.random.default_rng(0))


def test_kmeanspp_skips_duplicates_while_distinct_points_remain():
    pts = np.array([[0.0, 0.0]] * 5 + [[1.0, 0.0]] * 5 + [[0.0, 1.0]])
    for seed in range(200):
        idx = kmeanspp_indices(pts, 3, np.random.default_rng(seed))
        assert len({tuple(pts[i]) for i in idx}) == 3


def test_kmeanspp_two_far_clusters_monte_carlo():
    rng = np.random.default_rng(0)
    a = rng.normal(scale=0.01, size=(20, 2))
    b = rng.normal(scale=0.01, size=(20, 2)) + [100.0, 0.0]
    pts = np.vstack([a, b])
    hits = 0
    for seed in range(1000):
        idx = kmeanspp_indices(pts, 2, RngState(seed).stream("init"))
        hits += (idx[0] < 20) != (idx[1] < 20)
    assert hits / 1000 >= 0.99


def test_assign_tie_goes_to_lowest_index():
    cents = np.array([[-1.0, 0.0], [0.0, 5.0], [1.0, 0.0]])
    assert assign(np.array([[0.0, 0.0]]), cents).tolist() == [0]


def test_assign_single_centroid():
    assert assign(np.random.default_rng(0).normal(size=(7, 3)), np.zeros((1, 3))).tolist() == [0] * 7


def test_assign_square_corners():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    cents = np.array([[0.0, 0.5], [1.0, 0.5]])
    assert assign(pts, cents).tolist() == [0, 0, 1, 1]


def test_assign_dimension_mismatch():
    with pytest.raises(DimensionError):
        assign(np.zeros((2, 3)), np.zeros((1, 2)))


def test_assign_idempotent(blobs):
    pts, _ = blobs
    cents = pts[:4]
    first = assign(pts, cents)
    np.testing.assert_array_equal(first, assign(pts, cents))


def test_numeric_update_mean():
    pts = np.array([[0.0, 0.0], [2.0, 2.0]])
    out = update_numeric_centroids(pts, [0, 0], 1, np.zeros((1, 2)))
    np.testing.assert_array_equal(out, [[1.0, 1.0]])


def test_empty_cluster_reseeded_at_farthest_point():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [0.5, 0.0]])
    prev = np.array([[0.0, 0.0], [100.0, 100.0]])
    out = update_numeric_centroids(pts, [0, 0, 0, 0], 2, prev)
    np.testing.assert_array_equal(out[0], pts.mean(axis=0))
    np.testing.assert_array_equal(out[1], [5.0, 0.0])


def test_two_empty_clusters_get_distinct_seeds():
    pts = np.array([[0.0], [1.0], [4.0], [9.0]])
    out = update_numeric_centroids(pts, [0, 0, 0, 0], 3, np.zeros((3, 1)))
    assert out[1, 0] == 9.0 and out[2, 0] == 4.0


@pytest.mark.parametrize(
    "pts, assignment, cents, expected",
    [
        ([[1.0, 1.0], [2.0, 2.0]], [0, 1], [[1.0, 1.0], [2.0, 2.0]], 0.0),
        ([[0.0, 0.0], [2.0, 0.0]], [0, 0], [[1.0, 0.0]], 2.0),
    ],
)
def test_objective_examples(pts, assignment, cents, expected):
    assert objective(np.array(pts), assignment, np.array(cents)) == expected


def test_means_minimize_objective_for_fixed_assignments():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(40, 4))
    a = rng.integers(0, 3, size=40)
    a[:3] = [0, 1, 2]
    means = np.vstack([pts[a == j].mean(axis=0) for j in range(3)])
    best = objective(pts, a, means)
    for _ in range(100):
        assert objective(pts, a, means + rng.normal(scale=0.1, size=means.shape)) >= best


def test_lloyd_fixed_point(blobs):
    pts, labels = blobs
    means = np.vstack([pts[labels == j].mean(axis=0) for j in range(3)])
    state = ClusterState(means, assign(pts, means))
    nxt = lloyd_step(pts, state)
    np.testing.assert_array_equal(nxt.assignments, state.assignments)
    np.testing.assert_allclose(nxt.centroids, state.centroids, rtol=0, atol=1e-12)


def test_lloyd_step_never_increases_objective():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(int(rng.integers(5, 60)), 3))
        k = int(rng.integers(1, 5))
        cents = pts[rng.choice(len(pts), k, replace=False)]
        state = ClusterState(cents, assign(pts, cents))
        before = objective(pts, state.assignments, state.centroids)
        nxt = lloyd_step(pts, state)
        assert objective(pts, nxt.assignments, nxt.centroids) <= before * (1 + 1e-9) + 1e-12


def test_two_points_converge_fast():
    pts = np.array([[0.0, 0.0], [4.0, 0.0]])
    state, report = run_kmeans(pts, 2, 10, RngState(0))
    assert report.iterations <= 2
    assert sorted(state.assignments.tolist()) == [0, 1]


def test_k1_centroid_is_global_mean():
    pts = np.random.default_rng(5).normal(size=(25, 3))
    state, _ = run_kmeans(pts, 1, 1, RngState(0))
    np.testing.assert_allclose(state.centroids[0], pts.mean(axis=0), rtol=0, atol=1e-15)


def test_t1_equals_init_plus_one_step():
    pts = np.random.default_rng(8).normal(size=(30, 2))
    state, report = run_kmeans(pts, 3, 1, RngState(4))
    init = kmeanspp_init(pts, 3, RngState(4).stream("init"))
    manual = lloyd_step(pts, ClusterState(init, assign(pts, init)))
    np.testing.assert_array_equal(state.centroids, manual.centroids)
    np.testing.assert_array_equal(state.assignments, manual.assignments)
    assert report.iterations == 1


def _synthetic_three(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-50, 50, size=(3, 5))
    while min(np.linalg.norm(centers[i] - centers[j]) for i in range(3) for j in range(i)) < 20:
        centers = rng.uniform(-50, 50, size=(3, 5))
    labels = rng.integers(0, 3, size=90)
    labels[:3] = [0, 1, 2]
    return centers[labels] + rng.normal(scale=0.5, size=(90, 5)), labels


def test_well_separated_three_clusters_recovered():
    # generator oracle: blobs of width 0.5 with centres >= 20 apart
    perfect = 0
    for seed in range(100):
        pts, labels = _synthetic_three(seed)
        state, _ = run_kmeans(pts, 3, 50, RngState(seed))
        perfect += acc(labels, state.assignments) == 1.0
    assert perfect >= 95


def test_run_kmeans_deterministic():
    pts = np.random.default_rng(2).normal(size=(80, 4))
    s1, r1 = run_kmeans(pts, 4, 30, RngState(11))
    s2, r2 = run_kmeans(pts, 4, 30, RngState(11))
    np.testing.assert_array_equal(s1.centroids, s2.centroids)
    np.testing.assert_array_equal(s1.assignments, s2.assignments)
    assert r1.objective_trace == r2.objective_trace


def test_early_stop_records_actual_iterations(blobs):
    pts, _ = blobs
    _, report = run_kmeans(pts, 3, 100, RngState(0))
    assert report.iterations < 100
    assert report.nominal_iterations == 100
    _, full = run_kmeans(pts, 3, 100, RngState(0), early_stop=False)
    assert full.iterations == 100
