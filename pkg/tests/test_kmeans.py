import numpy as np
import pytest

from protoadapt import (
    ClusterModel,
    ConfigError,
    EmbeddingSet,
    KMeansConfig,
    ShapeError,
    assign,
    compute_inertia,
    fit_kmeans,
    fit_kmeans_with_traces,
    load_cluster_model,
    save_cluster_model,
)
from protoadapt.kmeans import kmeans_pp_indices
from protoadapt.rng import SplitMix64

from oracles import exhaustive_kmeans_inertia, nearest_index


def make_set(vectors, name="km"):
    vectors = np.asarray(vectors, dtype=np.float32)
    return EmbeddingSet(
        domain_name=name,
        vectors=vectors,
        sample_ids=tuple(str(i) for i in range(len(vectors))),
    )


def test_n_equals_k_gives_zero_inertia():
    rng = np.random.default_rng(0)
    emb = make_set(rng.normal(size=(6, 3)))
    model = fit_kmeans(emb, KMeansConfig(k=6, seed=1))
    assert model.inertia == 0.0
    assert sorted(model.assignments.tolist()) == list(range(6))


def test_two_well_separated_groups_match_bruteforce():
    rng = np.random.default_rng(3)
    g1 = rng.normal(size=(4, 2)) * 0.1
    g2 = rng.normal(size=(4, 2)) * 0.1 + 10.0
    X = np.vstack([g1, g2]).astype(np.float32)
    emb = make_set(X)
    model = fit_kmeans(emb, KMeansConfig(k=2, seed=0))
    oracle = exhaustive_kmeans_inertia(X.astype(np.float64), 2)
    assert model.inertia == pytest.approx(oracle, rel=1e-9)
    assert len(set(model.assignments[:4])) == 1
    assert len(set(model.assignments[4:])) == 1


def test_assign_centroid_and_tiebreak():
    centroids = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]], dtype=np.float32)
    model = ClusterModel(
        k=3, dim=2, centroids=centroids,
        assignments=np.array([0, 1, 2], np.int32), inertia=0.0, seed=0, n_iter=1,
    )
    assert assign(model, np.array([4.0, 0.0])) == 2
    # exactly between centroids 0 and 1 -> lower index
    assert assign(model, np.array([1.0, 0.0])) == 0
    with pytest.raises(ShapeError):
        assign(model, np.array([1.0, 0.0, 3.0]))


def test_assign_matches_linear_scan_oracle():
    rng = np.random.default_rng(9)
    centroids = rng.normal(size=(7, 5)).astype(np.float32)
    model = ClusterModel(
        k=7, dim=5, centroids=centroids,
        assignments=np.arange(7, dtype=np.int32), inertia=0.0, seed=0, n_iter=1,
    )
    for _ in range(50):
        q = rng.normal(size=5)
        assert assign(model, q) == nearest_index(q, centroids)


def test_fit_deterministic_across_runs_and_threads():
    rng = np.random.default_rng(5)
    emb = make_set(rng.normal(size=(300, 8)))
    cfg = KMeansConfig(k=12, seed=42, n_init=3)
    m1 = fit_kmeans(emb, cfg, threads=1)
    m2 = fit_kmeans(emb, cfg, threads=1)
    m4 = fit_kmeans(emb, cfg, threads=4)
    assert m1.centroids.tobytes() == m2.centroids.tobytes() == m4.centroids.tobytes()
    assert np.array_equal(m1.assignments, m4.assignments)
    assert m1.inertia == m4.inertia


def test_monotone_inertia_traces():
    rng = np.random.default_rng(11)
    emb = make_set(rng.normal(size=(200, 4)))
    _, traces = fit_kmeans_with_traces(emb, KMeansConfig(k=8, seed=7, n_init=5))
    assert len(traces) == 5
    for trace in traces:
        for a, b in zip(trace, trace[1:]):
            assert b <= a * (1 + 1e-12) + 1e-12


def test_kmeanspp_prefers_far_points():
    # 1D: two near points and one far; conditional on the first pick being
    # among the near pair, the far point should be picked second almost always.
    X = np.array([[0.0], [0.05], [100.0]], dtype=np.float64)
    x_sq = np.einsum("ij,ij->i", X, X)
    far_second = 0
    cond = 0
    for seed in range(2000):
        idx = kmeans_pp_indices(X, x_sq, 2, SplitMix64(seed))
        if idx[0] in (0, 1):
            cond += 1
            far_second += int(idx[1] == 2)
    assert cond > 1000
    assert far_second / cond > 0.99


def test_permutation_invariance_of_inertia():
    # Seeding depends on row indices, so the property is asserted where the
    # optimum is unambiguous and best-of-restarts reliably reaches it.
    rng = np.random.default_rng(13)
    centers = rng.normal(size=(5, 3)) * 20
    X = np.vstack([c + rng.normal(size=(12, 3)) * 0.1 for c in centers]).astype(np.float32)
    emb = make_set(X)
    model = fit_kmeans(emb, KMeansConfig(k=5, seed=3))
    perm = rng.permutation(len(X))
    emb_p = make_set(X[perm], name="km_p")
    model_p = fit_kmeans(emb_p, KMeansConfig(k=5, seed=3))
    # cluster indices may differ; the achieved inertia must not
    assert model_p.inertia == pytest.approx(model.inertia, rel=1e-7)


def test_no_empty_clusters_with_duplicates():
    # heavy duplication forces empty-cluster repair
    X = np.repeat(np.array([[0.0, 0.0], [1.0, 1.0]], dtype=np.float32), 10, axis=0)
    emb = make_set(X)
    model = fit_kmeans(emb, KMeansConfig(k=6, seed=0))
    assert set(model.assignments.tolist()) == set(range(6))
    assert compute_inertia(emb, model) == pytest.approx(model.inertia, rel=1e-4, abs=1e-9)


def test_inertia_recompute_invariant():
    rng = np.random.default_rng(17)
    emb = make_set(rng.normal(size=(500, 16)) * 3)
    model = fit_kmeans(emb, KMeansConfig(k=20, seed=1, n_init=2))
    assert compute_inertia(emb, model) == pytest.approx(model.inertia, rel=1e-4)


def test_k_validation():
    emb = make_set(np.ones((4, 2), np.float32))
    with pytest.raises(ConfigError):
        fit_kmeans(emb, KMeansConfig(k=5, seed=0))
    with pytest.raises(ConfigError):
        KMeansConfig(k=0, seed=0)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(23)
    emb = make_set(rng.normal(size=(40, 6)))
    model = fit_kmeans(emb, KMeansConfig(k=4, seed=9))
    save_cluster_model(model, emb, tmp_path / "m.json", tmp_path / "m.emb")
    back = load_cluster_model(tmp_path / "m.json", tmp_path / "m.emb")
    assert back.k == model.k and back.seed == model.seed and back.n_iter == model.n_iter
    assert back.centroids.tobytes() == model.centroids.tobytes()
    assert np.array_equal(back.assignments, model.assignments)
    assert back.inertia == model.inertia
