"""Label transfer across domains and nearest-prototype classification.

Each target cluster adopts the label of the source cluster closest to it in
the inter-domain distance matrix; queries are then classified by their
nearest prototype (squared L2, lowest index on ties) using the appropriate
label table: the retrieved source labels for source queries, the transferred
labels for target queries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import DistanceMatrix
from .errors import ShapeError, ValidationError
from .prototypes import PrototypeSet


@dataclass(frozen=True)
class DomainMapping:
    """Target-cluster -> source-cluster assignment with transferred labels."""

    target_to_source: np.ndarray  # (k_target,) int32
    target_labels: np.ndarray  # (k_target,) int32
    metric: str

    def __post_init__(self):
        t2s = np.ascontiguousarray(self.target_to_source, dtype=np.int32)
        lab = np.ascontiguousarray(self.target_labels, dtype=np.int32)
        t2s.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "target_to_source", t2s)
        object.__setattr__(self, "target_labels", lab)

    @property
    def k_target(self) -> int:
        return self.target_to_source.shape[0]


@dataclass(frozen=True)
class Prediction:
    query_id: str
    predicted_label: int
    nearest_prototype_index: int
    distance: float  # Euclidean, for reporting


def closest_mapping(matrix: DistanceMatrix, source_labels: np.ndarray) -> DomainMapping:
    """Map each target cluster to the nearest source cluster (ties -> lowest index)."""
    labels = np.ascontiguousarray(source_labels, dtype=np.int32)
    if labels.shape != (matrix.k_source,):
        raise ShapeError(f"expected {matrix.k_source} source labels, got {labels.shape}")
    nan_cells = np.argwhere(np.isnan(matrix.values))
    if nan_cells.size:
        i, j = nan_cells[0]
        raise ValidationError(f"NaN in distance matrix at cell ({int(i)}, {int(j)})")
    t2s = np.argmin(matrix.values, axis=0).astype(np.int32)
    return DomainMapping(
        target_to_source=t2s,
        target_labels=labels[t2s],
        metric=matrix.metric,
    )


def _nearest_prototype(queries: np.ndarray, protos: PrototypeSet) -> tuple[np.ndarray, np.ndarray]:
    P = protos.vectors.astype(np.float64)
    q_sq = np.einsum("ij,ij->i", queries, queries)
    p_sq = np.einsum("ij,ij->i", P, P)
    d2 = q_sq[:, None] + p_sq[None, :] - 2.0 * (queries @ P.T)
    np.maximum(d2, 0.0, out=d2)
    idx = np.argmin(d2, axis=1)
    return idx, np.sqrt(d2[np.arange(len(idx)), idx])


def predict(
    query: np.ndarray, protos: PrototypeSet, labels: np.ndarray, query_id: str = ""
) -> Prediction:
    """Classify one query by its nearest prototype under the given label table."""
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if q.shape[1] != protos.dim:
        raise ShapeError(f"query has dim {q.shape[1]}, prototypes have dim {protos.dim}")
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    if labels.shape != (protos.k,):
        raise ShapeError(f"expected {protos.k} labels, got {labels.shape}")
    idx, dist = _nearest_prototype(q, protos)
    j = int(idx[0])
    return Prediction(
        query_id=query_id,
        predicted_label=int(labels[j]),
        nearest_prototype_index=j,
        distance=float(dist[0]),
    )


def predict_batch(
    queries: np.ndarray,
    protos: PrototypeSet,
    labels: np.ndarray,
    query_ids: tuple[str, ...] | None = None,
) -> list[Prediction]:
    """Vectorized predict over the rows of `queries`."""
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != protos.dim:
        raise ShapeError(f"queries must be (n, {protos.dim})")
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    if labels.shape != (protos.k,):
        raise ShapeError(f"expected {protos.k} labels, got {labels.shape}")
    idx, dist = _nearest_prototype(Q, protos)
    ids = query_ids if query_ids is not None else tuple("" for _ in range(Q.shape[0]))
    return [
        Prediction(
            query_id=ids[i],
            predicted_label=int(labels[j]),
            nearest_prototype_index=int(j),
            distance=float(dist[i]),
        )
        for i, j in enumerate(idx)
    ]


def predicted_labels(queries: np.ndarray, protos: PrototypeSet, labels: np.ndarray) -> np.ndarray:
    """Labels only, for scoring; same tie-break as predict."""
    Q = np.asarray(queries, dtype=np.float64)
    idx, _ = _nearest_prototype(Q, protos)
    return np.ascontiguousarray(labels, dtype=np.int32)[idx]


def save_mapping(mapping: DomainMapping, path: str | Path, **extra) -> None:
    doc = {
        "target_to_source": [int(v) for v in mapping.target_to_source],
        "target_labels": [int(v) for v in mapping.target_labels],
        "metric": mapping.metric,
        **extra,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_mapping(path: str | Path) -> DomainMapping:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return DomainMapping(
        target_to_source=np.asarray(doc["target_to_source"], dtype=np.int32),
        target_labels=np.asarray(doc["target_labels"], dtype=np.int32),
        metric=doc["metric"],
    )
