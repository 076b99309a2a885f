"""Store a domain's embeddings in the EMB1 binary format and read them back.

The file layout is a 16-byte header (magic, version, label flag, n, d),
row-major float32 vectors, and an optional int32 label block; string
metadata lives in a JSON sidecar next to the file. Round-trips are bitwise.
"""

import tempfile
from pathlib import Path

import numpy as np

from protoadapt import EmbeddingSet, read_embeddings, write_embeddings

rng = np.random.default_rng(0)
workdir = Path(tempfile.mkdtemp())

# a labeled toy domain: 6 samples, 4 dimensions, 2 classes
emb = EmbeddingSet(
    domain_name="sketch",
    vectors=rng.normal(size=(6, 4)).astype(np.float32),
    sample_ids=tuple(f"sketch/img_{i}.png" for i in range(6)),
    labels=np.array([0, 0, 0, 1, 1, 1], dtype=np.int32),
    class_names=("cat", "dog"),
)

path = workdir / "sketch.emb"
write_embeddings(emb, path)
print(f"wrote {path} ({path.stat().st_size} bytes) + {path.name}.meta.json")

back = read_embeddings(path)
print("round-trip bitwise equal:", back.vectors.tobytes() == emb.vectors.tobytes())
print("labels:", back.labels.tolist(), "classes:", back.class_names)

# the reader validates before allocating: corrupt the declared row count
raw = bytearray(path.read_bytes())
raw[8:12] = (2**31 - 1).to_bytes(4, "little")
(workdir / "corrupt.emb").write_bytes(bytes(raw))
try:
    read_embeddings(workdir / "corrupt.emb")
except Exception as e:
    print(f"corrupt header rejected: {type(e).__name__}: {e}")
