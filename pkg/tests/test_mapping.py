import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoadapt import (
    PrototypeSet,
    ShapeError,
    ValidationError,
    closest_mapping,
    load_mapping,
    predict,
    predict_batch,
    save_mapping,
)
from protoadapt.distance import DistanceMatrix

from oracles import column_argmin, nearest_index


def matrix(values):
    return DistanceMatrix(values=np.asarray(values, np.float64), metric="l2_centroid")


def protos_from(vectors, name="t"):
    vectors = np.asarray(vectors, np.float32)
    return PrototypeSet(
        domain_name=name,
        indices=np.arange(len(vectors)),
        vectors=vectors,
    )


def test_unique_zero_per_column_is_picked():
    D = np.ones((3, 3))
    D[2, 0] = D[0, 1] = D[1, 2] = 0.0
    m = closest_mapping(matrix(D), np.array([10, 11, 12], np.int32))
    assert m.target_to_source.tolist() == [2, 0, 1]
    assert m.target_labels.tolist() == [12, 10, 11]


def test_tied_minima_take_lowest_row():
    D = np.full((5, 1), 7.0)
    D[1, 0] = D[4, 0] = 1.0
    m = closest_mapping(matrix(D), np.arange(5, dtype=np.int32))
    assert m.target_to_source.tolist() == [1]


def test_matches_columnwise_scan_oracle():
    rng = np.random.default_rng(6)
    D = rng.uniform(size=(6, 9))
    m = closest_mapping(matrix(D), np.arange(6, dtype=np.int32))
    assert m.target_to_source.tolist() == column_argmin(D)


def test_nan_names_cell():
    D = np.ones((2, 2))
    D[1, 0] = np.nan
    bad = DistanceMatrix.__new__(DistanceMatrix)  # bypass constructor validation
    object.__setattr__(bad, "values", D)
    object.__setattr__(bad, "metric", "l2_centroid")
    object.__setattr__(bad, "sinkhorn_params", None)
    object.__setattr__(bad, "converged", None)
    with pytest.raises(ValidationError, match=r"\(1, 0\)"):
        closest_mapping(bad, np.array([0, 1], np.int32))


@settings(derandomize=True, max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_argmin_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    D = rng.uniform(0.1, 5.0, size=(rng.integers(2, 8), rng.integers(2, 8)))
    labels = rng.integers(0, 9, D.shape[0]).astype(np.int32)
    base = closest_mapping(matrix(D), labels)
    mono = closest_mapping(matrix(np.exp(D)), labels)
    assert base.target_to_source.tolist() == mono.target_to_source.tolist()
    assert base.target_labels.tolist() == mono.target_labels.tolist()


def test_predict_exact_prototype():
    protos = protos_from([[0, 0], [1, 1], [2, 2], [3, 3]])
    labels = np.array([4, 5, 6, 7], np.int32)
    pred = predict(np.array([3.0, 3.0]), protos, labels, query_id="q")
    assert pred.nearest_prototype_index == 3
    assert pred.predicted_label == 7
    assert pred.distance == 0.0
    assert pred.query_id == "q"


def test_source_vs_target_is_just_a_label_table_swap():
    protos = protos_from([[0, 0], [10, 10]])
    source_labels = np.array([1, 2], np.int32)
    transferred = np.array([8, 9], np.int32)
    q = np.array([0.2, 0.1])
    assert predict(q, protos, source_labels).predicted_label == 1
    assert predict(q, protos, transferred).predicted_label == 8


def test_predict_matches_nn_oracle():
    rng = np.random.default_rng(10)
    protos = protos_from(rng.normal(size=(12, 6)))
    labels = rng.integers(0, 4, 12).astype(np.int32)
    for _ in range(50):
        q = rng.normal(size=6)
        pred = predict(q, protos, labels)
        assert pred.nearest_prototype_index == nearest_index(q, protos.vectors)


def test_predict_batch_consistent():
    rng = np.random.default_rng(12)
    protos = protos_from(rng.normal(size=(5, 3)))
    labels = rng.integers(0, 3, 5).astype(np.int32)
    Q = rng.normal(size=(20, 3))
    batch = predict_batch(Q, protos, labels, query_ids=tuple(str(i) for i in range(20)))
    for i, p in enumerate(batch):
        single = predict(Q[i], protos, labels, query_id=str(i))
        assert (p.query_id, p.predicted_label, p.nearest_prototype_index) == (
            single.query_id,
            single.predicted_label,
            single.nearest_prototype_index,
        )
        assert p.distance == pytest.approx(single.distance, rel=1e-12, abs=1e-12)


def test_source_permutation_leaves_target_labels_unchanged():
    rng = np.random.default_rng(14)
    D = rng.uniform(size=(6, 4))
    labels = rng.integers(0, 5, 6).astype(np.int32)
    base = closest_mapping(matrix(D), labels)
    perm = rng.permutation(6)
    permuted = closest_mapping(matrix(D[perm]), labels[perm])
    assert permuted.target_labels.tolist() == base.target_labels.tolist()


def test_two_hop_composition():
    # predict on a target query == nearest target prototype, then its mapped
    # source cluster's label
    rng = np.random.default_rng(16)
    D = rng.uniform(size=(4, 5))
    source_labels = rng.integers(0, 7, 4).astype(np.int32)
    m = closest_mapping(matrix(D), source_labels)
    protos_t = protos_from(rng.normal(size=(5, 2)))
    q = rng.normal(size=2)
    pred = predict(q, protos_t, m.target_labels)
    j = pred.nearest_prototype_index
    assert pred.predicted_label == source_labels[m.target_to_source[j]]


def test_shape_errors():
    protos = protos_from([[0.0, 0.0]])
    with pytest.raises(ShapeError):
        predict(np.zeros(3), protos, np.array([0], np.int32))
    with pytest.raises(ShapeError):
        predict(np.zeros(2), protos, np.array([0, 1], np.int32))
    with pytest.raises(ShapeError):
        closest_mapping(matrix(np.ones((2, 2))), np.array([0], np.int32))


def test_mapping_roundtrip(tmp_path):
    m = closest_mapping(matrix(np.array([[1.0, 2.0], [0.5, 3.0]])), np.array([4, 9], np.int32))
    save_mapping(m, tmp_path / "m.json")
    back = load_mapping(tmp_path / "m.json")
    assert np.array_equal(back.target_to_source, m.target_to_source)
    assert np.array_equal(back.target_labels, m.target_labels)
    assert back.metric == m.metric
