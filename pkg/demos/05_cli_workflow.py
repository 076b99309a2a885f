"""The same pipeline driven through the command-line interface.

Each stage writes resumable artifacts under the output directory; rerunning
a stage with an unchanged config is a no-op, and --force overwrites stale
artifacts after a config change. Inspect report.html in a browser at the end.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from protoadapt import EmbeddingSet, write_embeddings

workdir = Path(tempfile.mkdtemp())
rng = np.random.default_rng(5)

num_classes, per_class, dim = 4, 40, 8
means = rng.normal(size=(num_classes, dim)) * 3.0
labels = np.repeat(np.arange(num_classes, dtype=np.int32), per_class)
noise = rng.normal(size=(len(labels), dim)) * 0.3
shift = rng.normal(size=(num_classes, dim)) * 0.5

for name, offset in (("studio", 0.0), ("outdoor", shift[labels])):
    emb = EmbeddingSet(
        domain_name=name,
        vectors=(means[labels] + offset + noise).astype(np.float32),
        sample_ids=tuple(f"{name}/{i}.jpg" for i in range(len(labels))),
        labels=labels,
    )
    write_embeddings(emb, workdir / f"{name}.emb")

config = {
    "source_path": "studio.emb",
    "target_path": "outdoor.emb",
    "num_classes": num_classes,
    "clusters_per_class": 3,
    "metric": "l2_centroid",
    "seeds": [0, 1, 2],
    "output_dir": "artifacts",
}
(workdir / "pipeline.json").write_text(json.dumps(config, indent=2))

base = [sys.executable, "-m", "protoadapt.cli", "--config", str(workdir / "pipeline.json")]
for stage in ("cluster", "prototypes", "match", "predict", "evaluate", "report"):
    print(f"$ protoadapt {stage}")
    out = subprocess.run(base + [stage], capture_output=True, text=True)
    print(out.stdout, end="")
    if out.returncode != 0:
        print(out.stderr, end="")
        raise SystemExit(out.returncode)

eval_doc = json.loads((workdir / "artifacts" / "eval.json").read_text())
pair = eval_doc["pairs"][0]
print(f"\naccuracy {pair['mean']:.3f} +/- {pair['ci95_halfwidth']:.3f} over seeds {pair['seeds']}")
print(f"artifacts in {workdir / 'artifacts'}")

# a second invocation is a no-op thanks to the config fingerprint
out = subprocess.run(base + ["cluster"], capture_output=True, text=True)
print("\n$ protoadapt cluster   (rerun)")
print(out.stdout, end="")
