"""On-disk embedding format and in-memory representation of a domain dataset.

A domain's samples are dense float32 vectors stored in a small self-describing
binary file (little-endian throughout):

    bytes 0-3   magic "EMB1"
    byte  4     format version, currently 1
    byte  5     has_labels flag (0 or 1)
    bytes 6-7   reserved, must be zero
    bytes 8-11  u32 n, number of rows
    bytes 12-15 u32 d, embedding width
    then        n*d float32 values, row-major
    then        n int32 label values, present iff has_labels == 1

String metadata lives in a JSON sidecar at `<path>.meta.json`:

    {"domain_name": str, "sample_ids": [str], "class_names": [str] | null}

Labels are class indices >= 0; unlabeled sets omit the label block entirely
rather than using a sentinel value. Round-trips through write/read are
bitwise exact for vectors and exact for all metadata.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError, ValidationError

_MAGIC = b"EMB1"
_VERSION = 1
_HEADER = struct.Struct("<4sBBHII")


@dataclass(frozen=True)
class EmbeddingSet:
    """Immutable container for one domain's embedded samples.

    vectors is an (n, d) float32 matrix of finite values; labels, when
    present, are non-negative int32 class indices; sample_ids are unique
    strings (typically relative image paths).
    """

    domain_name: str
    vectors: np.ndarray
    sample_ids: tuple[str, ...]
    labels: np.ndarray | None = None
    class_names: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValidationError("vectors must be a 2-D matrix")
        n, d = vectors.shape
        if n < 1 or d < 1:
            raise ValidationError("embedding set must have at least one row and one column")
        bad = ~np.isfinite(vectors).all(axis=1)
        if bad.any():
            raise ValidationError(f"non-finite value in vectors row {int(np.argmax(bad))}")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

        sample_ids = tuple(str(s) for s in self.sample_ids)
        if len(sample_ids) != n:
            raise ValidationError(f"expected {n} sample_ids, got {len(sample_ids)}")
        if len(set(sample_ids)) != n:
            raise ValidationError("sample_ids must be unique within the set")
        object.__setattr__(self, "sample_ids", sample_ids)

        class_names = self.class_names
        if class_names is not None:
            class_names = tuple(str(c) for c in class_names)
        object.__setattr__(self, "class_names", class_names)

        labels = self.labels
        if labels is not None:
            labels = np.ascontiguousarray(labels, dtype=np.int32)
            if labels.shape != (n,):
                raise ValidationError(f"labels must have shape ({n},)")
            if (labels < 0).any():
                first = int(np.argmax(labels < 0))
                raise ValidationError(f"negative label at row {first}; unlabeled sets omit labels")
            if class_names is not None and (labels >= len(class_names)).any():
                first = int(np.argmax(labels >= len(class_names)))
                raise ValidationError(
                    f"label {int(labels[first])} at row {first} out of range for "
                    f"{len(class_names)} class names"
                )
            labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    """Write `emb` to `path` in the EMB1 format plus its JSON sidecar.

    Output bytes are a pure function of the set contents: two writes of equal
    sets produce identical files.
    """
    path = Path(path)
    has_labels = 1 if emb.labels is not None else 0
    header = _HEADER.pack(_MAGIC, _VERSION, has_labels, 0, emb.n, emb.dim)
    payload = emb.vectors.astype("<f4", copy=False).tobytes(order="C")
    blob = header + payload
    if has_labels:
        blob += emb.labels.astype("<i4", copy=False).tobytes(order="C")
    path.write_bytes(blob)

    meta = {
        "domain_name": emb.domain_name,
        "sample_ids": list(emb.sample_ids),
        "class_names": list(emb.class_names) if emb.class_names is not None else None,
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an EMB1 file and its sidecar back into an EmbeddingSet.

    Header fields are validated against the actual file size before any
    array is built, so a corrupt header cannot trigger a large allocation.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncationError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, has_labels, reserved, n, d = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if has_labels not in (0, 1):
        raise FormatError(f"{path}: has_labels flag must be 0 or 1, got {has_labels}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved header bytes must be zero")
    if n < 1 or d < 1:
        raise FormatError(f"{path}: declared n={n}, d={d} must both be positive")

    expected = _HEADER.size + 4 * n * d + (4 * n if has_labels else 0)
    if len(data) < expected:
        raise TruncationError(
            f"{path}: header declares {expected} bytes but file has only {len(data)}"
        )
    if len(data) > expected:
        raise FormatError(f"{path}: {len(data) - expected} trailing bytes after declared payload")

    vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=_HEADER.size)
    vectors = vectors.reshape(n, d).astype(np.float32, copy=True)
    labels = None
    if has_labels:
        labels = np.frombuffer(data, dtype="<i4", count=n, offset=_HEADER.size + 4 * n * d)
        labels = labels.astype(np.int32, copy=True)

    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FormatError(f"{path}: missing metadata sidecar {sidecar.name}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{sidecar}: invalid JSON ({e})") from e
    for key in ("domain_name", "sample_ids"):
        if key not in meta:
            raise FormatError(f"{sidecar}: missing required key {key!r}")

    return EmbeddingSet(
        domain_name=meta["domain_name"],
        vectors=vectors,
        sample_ids=tuple(meta["sample_ids"]),
        labels=labels,
        class_names=tuple(meta["class_names"]) if meta.get("class_names") is not None else None,
    )
