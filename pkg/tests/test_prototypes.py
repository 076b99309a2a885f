import logging

import numpy as np
import pytest

from protoadapt import (
    EmbeddingSet,
    KMeansConfig,
    MissingLabelsError,
    fit_kmeans,
    load_prototypes,
    retrieve_labels,
    save_prototypes,
    select_prototypes,
)
from protoadapt.kmeans import ClusterModel

from oracles import label_histogram_majorities, nearest_index


def make_set(vectors, labels=None, name="p"):
    vectors = np.asarray(vectors, dtype=np.float32)
    return EmbeddingSet(
        domain_name=name,
        vectors=vectors,
        sample_ids=tuple(f"s{i}" for i in range(len(vectors))),
        labels=None if labels is None else np.asarray(labels, dtype=np.int32),
    )


def model_for(emb, centroids, assignments):
    return ClusterModel(
        k=len(centroids),
        dim=emb.dim,
        centroids=np.asarray(centroids, np.float32),
        assignments=np.asarray(assignments, np.int32),
        inertia=0.0,
        seed=0,
        n_iter=1,
    )


def test_sample_at_centroid_selected():
    emb = make_set([[0, 0], [5, 5], [9, 9]])
    model = model_for(emb, [[5, 5]], [0, 0, 0])
    protos = select_prototypes(emb, model)
    assert protos.indices.tolist() == [1]
    assert protos.vectors.tobytes() == emb.vectors[[1]].tobytes()


def test_equidistant_tie_takes_lower_index():
    emb = make_set([[1, 0], [-1, 0]])
    model = model_for(emb, [[0, 0]], [0, 0])
    protos = select_prototypes(emb, model)
    assert protos.indices.tolist() == [0]


def test_matches_bruteforce_scan():
    rng = np.random.default_rng(4)
    emb = make_set(rng.normal(size=(20, 3)))
    model = fit_kmeans(emb, KMeansConfig(k=3, seed=2))
    protos = select_prototypes(emb, model)
    for j in range(3):
        assert protos.indices[j] == nearest_index(model.centroids[j], emb.vectors)


def test_global_argmin_can_leave_cluster_and_warns(caplog):
    # centroid of cluster 1 sits closest to a sample assigned to cluster 0
    emb = make_set([[0.0], [1.0], [10.0]])
    model = model_for(emb, [[0.9], [1.1]], [0, 1, 1])
    with caplog.at_level(logging.WARNING):
        protos = select_prototypes(emb, model)
    assert protos.indices.tolist() == [1, 1]
    assert any("outside" in r.message for r in caplog.records)
    restricted = select_prototypes(emb, model, restrict_to_cluster=True)
    assert restricted.indices.tolist() == [0, 1]


def test_pure_cluster_label_same_under_both_rules():
    emb = make_set([[0, 0], [0.1, 0], [5, 5]], labels=[7, 7, 2])
    model = model_for(emb, [[0.05, 0], [5, 5]], [0, 0, 1])
    protos = select_prototypes(emb, model)
    a = retrieve_labels(protos, emb, model, "prototype_sample")
    b = retrieve_labels(protos, emb, model, "cluster_majority")
    assert a.labels[0] == b.labels[0] == 7
    assert a.label_source == "prototype_sample" and b.label_source == "cluster_majority"


def test_rules_can_disagree():
    # prototype sample labeled 2 inside a cluster whose majority is 3
    emb = make_set([[0.0], [0.2], [0.3], [9.0]], labels=[2, 3, 3, 1])
    model = model_for(emb, [[0.05], [9.0]], [0, 0, 0, 1])
    protos = select_prototypes(emb, model)
    assert protos.indices[0] == 0  # the sample labeled 2
    by_sample = retrieve_labels(protos, emb, model, "prototype_sample")
    by_majority = retrieve_labels(protos, emb, model, "cluster_majority")
    assert by_sample.labels[0] == 2
    assert by_majority.labels[0] == 3
    assert by_sample.majority_labels[0] == 3  # diagnostic always populated


def test_majority_matches_recount_oracle():
    rng = np.random.default_rng(8)
    emb = make_set(rng.normal(size=(60, 4)), labels=rng.integers(0, 5, 60))
    model = fit_kmeans(emb, KMeansConfig(k=6, seed=3))
    protos = retrieve_labels(select_prototypes(emb, model), emb, model, "cluster_majority")
    oracle = label_histogram_majorities(emb.labels, model.assignments, 6)
    assert protos.labels.tolist() == oracle
    assert protos.majority_labels.tolist() == oracle


def test_label_is_pure_lookup_under_unrelated_permutation():
    # moving samples the prototype does not reference never changes its label
    rng = np.random.default_rng(15)
    X = rng.normal(size=(30, 2)).astype(np.float32)
    labels = rng.integers(0, 4, 30).astype(np.int32)
    emb = make_set(X, labels)
    model = fit_kmeans(emb, KMeansConfig(k=4, seed=1))
    protos = retrieve_labels(select_prototypes(emb, model), emb, model)
    for j in range(4):
        assert protos.labels[j] == labels[protos.indices[j]]


def test_unlabeled_set_raises():
    emb = make_set([[0.0], [1.0]])
    model = model_for(emb, [[0.5]], [0, 0])
    protos = select_prototypes(emb, model)
    with pytest.raises(MissingLabelsError):
        retrieve_labels(protos, emb, model)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(21)
    emb = make_set(rng.normal(size=(25, 3)), labels=rng.integers(0, 3, 25))
    model = fit_kmeans(emb, KMeansConfig(k=4, seed=5))
    protos = retrieve_labels(select_prototypes(emb, model), emb, model)
    save_prototypes(protos, emb, tmp_path / "p.json", tmp_path / "p.emb")
    back = load_prototypes(tmp_path / "p.json", tmp_path / "p.emb")
    assert np.array_equal(back.indices, protos.indices)
    assert back.vectors.tobytes() == protos.vectors.tobytes()
    assert np.array_equal(back.labels, protos.labels)
    assert back.label_source == protos.label_source
    assert np.array_equal(back.majority_labels, protos.majority_labels)
