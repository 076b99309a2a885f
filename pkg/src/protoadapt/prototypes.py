"""Prototype selection: the nearest real sample to each cluster centroid.

The argmin runs over the whole domain set, so a prototype can in principle
come from outside the cluster whose centroid it serves; when that happens a
warning is logged, and `restrict_to_cluster=True` switches to searching the
cluster's own members only. Source prototypes then receive labels either
from the prototype sample itself (default) or by majority vote over the
cluster's members; the majority is always computed as a diagnostic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .embio import EmbeddingSet, read_embeddings, write_embeddings
from .errors import MissingLabelsError, ShapeError
from .kmeans import ClusterModel

logger = logging.getLogger(__name__)

LABEL_RULES = ("prototype_sample", "cluster_majority")


@dataclass(frozen=True)
class PrototypeSet:
    """Per-cluster representative samples for one domain.

    vectors[j] is a bitwise copy of the embedding row at indices[j]; labels
    are present only after label retrieval (source domains).
    """

    domain_name: str
    indices: np.ndarray  # (k,) int64 sample indices into the domain set
    vectors: np.ndarray  # (k, d) float32
    labels: np.ndarray | None = None  # (k,) int32
    label_source: str | None = None
    majority_labels: np.ndarray | None = None  # (k,) int32, diagnostic

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        vec = np.ascontiguousarray(self.vectors, dtype=np.float32)
        idx.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "vectors", vec)
        for name in ("labels", "majority_labels"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.ascontiguousarray(arr, dtype=np.int32)
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.indices.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def select_prototypes(
    emb: EmbeddingSet, model: ClusterModel, *, restrict_to_cluster: bool = False
) -> PrototypeSet:
    """For each centroid, pick the nearest sample (squared L2, ties -> lowest index)."""
    if emb.dim != model.dim:
        raise ShapeError(f"set dim {emb.dim} != model dim {model.dim}")
    if emb.n != model.assignments.shape[0]:
        raise ShapeError("model was fit on a set of different size")

    X = emb.vectors.astype(np.float64)
    C = model.centroids.astype(np.float64)
    if restrict_to_cluster:
        chosen = np.empty(model.k, dtype=np.int64)
        for j in range(model.k):
            members = np.flatnonzero(model.assignments == j)
            diff = X[members] - C[j]
            d2 = np.einsum("ij,ij->i", diff, diff)
            chosen[j] = members[int(np.argmin(d2))]
    else:
        # n x k distances via f64 inner products; argmin over samples.
        x_sq = np.einsum("ij,ij->i", X, X)
        c_sq = np.einsum("ij,ij->i", C, C)
        d2 = x_sq[:, None] + c_sq[None, :] - 2.0 * (X @ C.T)
        chosen = np.argmin(d2, axis=0).astype(np.int64)
        outside = chosen[model.assignments[chosen] != np.arange(model.k)]
        if outside.size:
            logger.warning(
                "%d of %d prototypes fall outside their own cluster (global argmin)",
                outside.size,
                model.k,
            )
    return PrototypeSet(
        domain_name=emb.domain_name,
        indices=chosen,
        vectors=emb.vectors[chosen],
    )


def majority_labels(emb: EmbeddingSet, model: ClusterModel) -> np.ndarray:
    """Most frequent member label per cluster, ties by lowest class index."""
    if emb.labels is None:
        raise MissingLabelsError("majority vote requires a labeled set")
    out = np.empty(model.k, dtype=np.int32)
    for j in range(model.k):
        counts = np.bincount(emb.labels[model.assignments == j])
        out[j] = int(np.argmax(counts))
    return out


def retrieve_labels(
    protos: PrototypeSet,
    emb: EmbeddingSet,
    model: ClusterModel,
    rule: str = "prototype_sample",
) -> PrototypeSet:
    """Attach labels to prototypes according to `rule`.

    prototype_sample: the prototype's own sample label (pure lookup).
    cluster_majority: the most frequent label within the cluster.
    The majority vote is recorded in either case for diagnostics.
    """
    if rule not in LABEL_RULES:
        raise ValueError(f"unknown label rule {rule!r}; expected one of {LABEL_RULES}")
    if emb.labels is None:
        raise MissingLabelsError(f"cannot retrieve labels from unlabeled set {emb.domain_name!r}")
    maj = majority_labels(emb, model)
    if rule == "prototype_sample":
        labels = emb.labels[protos.indices].astype(np.int32)
    else:
        labels = maj.copy()
    return replace(protos, labels=labels, label_source=rule, majority_labels=maj)


def prototype_sample_ids(protos: PrototypeSet, emb: EmbeddingSet) -> tuple[str, ...]:
    return tuple(emb.sample_ids[int(i)] for i in protos.indices)


def save_prototypes(
    protos: PrototypeSet, emb: EmbeddingSet, json_path: str | Path, emb_path: str | Path, **extra
) -> None:
    """Persist as JSON plus an EMB1 file of the prototype vectors."""
    proto_set = EmbeddingSet(
        domain_name=protos.domain_name,
        vectors=protos.vectors,
        sample_ids=prototype_sample_ids(protos, emb),
        labels=protos.labels,
    )
    write_embeddings(proto_set, emb_path)
    doc = {
        "domain_name": protos.domain_name,
        "indices": [int(i) for i in protos.indices],
        "labels": [int(v) for v in protos.labels] if protos.labels is not None else None,
        "label_source": protos.label_source,
        "majority_labels": (
            [int(v) for v in protos.majority_labels] if protos.majority_labels is not None else None
        ),
        **extra,
    }
    Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_prototypes(json_path: str | Path, emb_path: str | Path) -> PrototypeSet:
    doc = json.loads(Path(json_path).read_text(encoding="utf-8"))
    proto_set = read_embeddings(emb_path)
    return PrototypeSet(
        domain_name=doc["domain_name"],
        indices=np.asarray(doc["indices"], dtype=np.int64),
        vectors=proto_set.vectors,
        labels=np.asarray(doc["labels"], dtype=np.int32) if doc["labels"] is not None else None,
        label_source=doc["label_source"],
        majority_labels=(
            np.asarray(doc["majority_labels"], dtype=np.int32)
            if doc["majority_labels"] is not None
            else None
        ),
    )
