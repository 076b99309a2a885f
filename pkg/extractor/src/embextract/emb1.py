"""Minimal writer for the EMB1 embedding file format.

Little-endian: magic "EMB1", version byte 1, has_labels byte, two reserved
zero bytes, u32 n, u32 d, n*d float32 row-major, then n int32 labels iff
has_labels. String metadata goes to a JSON sidecar at <path>.meta.json.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np


def write_emb1(
    path: str | Path,
    domain_name: str,
    vectors: np.ndarray,
    sample_ids: list[str],
    labels: np.ndarray | None = None,
    class_names: list[str] | None = None,
    extra_meta: dict | None = None,
) -> None:
    path = Path(path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, d = vectors.shape
    if n < 1 or d < 1:
        raise ValueError("need at least one row and one column")
    if len(sample_ids) != n:
        raise ValueError("sample_ids length must match the row count")
    blob = struct.pack("<4sBBHII", b"EMB1", 1, 1 if labels is not None else 0, 0, n, d)
    blob += vectors.tobytes(order="C")
    if labels is not None:
        blob += np.ascontiguousarray(labels, dtype="<i4").tobytes(order="C")
    path.write_bytes(blob)
    meta = {
        "domain_name": domain_name,
        "sample_ids": list(sample_ids),
        "class_names": list(class_names) if class_names is not None else None,
        **(extra_meta or {}),  # provenance; readers ignore unknown keys
    }
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
