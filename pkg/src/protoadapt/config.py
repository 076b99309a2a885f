"""Pipeline configuration, file loading and configuration fingerprints.

A fingerprint is the SHA-256 of the canonicalized result-affecting
configuration together with the content hashes of the input embedding
files. Execution parameters that cannot change results (thread count,
output directory) are excluded, so reruns at different thread counts
produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import asdict, dataclass, field
from pathlib import Path

from .distance import METRICS, SinkhornParams
from .errors import ConfigError
from .prototypes import LABEL_RULES


@dataclass(frozen=True)
class KMeansSettings:
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4


@dataclass(frozen=True)
class PipelineConfig:
    source_path: str
    target_path: str
    num_classes: int
    clusters_per_class: int = 5
    metric: str = "l2_centroid"
    sinkhorn: SinkhornParams = field(default_factory=SinkhornParams)
    kmeans: KMeansSettings = field(default_factory=KMeansSettings)
    seeds: tuple[int, ...] = (0, 1, 2)
    label_rule: str = "prototype_sample"
    l2_on: str = "centroids"
    restrict_prototypes_to_cluster: bool = False
    source_test_path: str | None = None
    target_test_path: str | None = None
    output_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigError("num_classes must be a positive integer")
        if self.clusters_per_class < 1:
            raise ConfigError("clusters_per_class must be a positive integer")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.label_rule not in LABEL_RULES:
            raise ConfigError(f"label_rule must be one of {LABEL_RULES}, got {self.label_rule!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def k(self) -> int:
        """Cluster count per domain: clusters_per_class x num_classes."""
        return self.clusters_per_class * self.num_classes

    def canonical_dict(self) -> dict:
        """Result-affecting fields only, with stable key order."""
        d = asdict(self)
        d.pop("threads")
        d.pop("output_dir")
        d["seeds"] = list(self.seeds)
        return d


def load_config(path: str | Path, **overrides) -> PipelineConfig:
    """Read a JSON or TOML config file; keyword overrides win over the file."""
    path = Path(path)
    if path.suffix == ".toml":
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a table/object at top level")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> PipelineConfig:
    raw = dict(raw)
    sinkhorn = raw.pop("sinkhorn", {})
    kmeans = raw.pop("kmeans", {})
    try:
        cfg = PipelineConfig(
            sinkhorn=sinkhorn if isinstance(sinkhorn, SinkhornParams) else SinkhornParams(**sinkhorn),
            kmeans=kmeans if isinstance(kmeans, KMeansSettings) else KMeansSettings(**kmeans),
            **raw,
        )
    except TypeError as e:
        raise ConfigError(f"bad config: {e}") from e
    if base_dir is not None:
        cfg = _resolve_paths(cfg, base_dir)
    return cfg


def _resolve_paths(cfg: PipelineConfig, base_dir: Path) -> PipelineConfig:
    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        q = Path(p)
        return str(q) if q.is_absolute() else str(base_dir / q)

    return config_from_dict(
        {
            **cfg.canonical_dict(),
            "threads": cfg.threads,
            "output_dir": resolve(cfg.output_dir),
            "source_path": resolve(cfg.source_path),
            "target_path": resolve(cfg.target_path),
            "source_test_path": resolve(cfg.source_test_path),
            "target_test_path": resolve(cfg.target_test_path),
        }
    )


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_fingerprint(cfg: PipelineConfig) -> str:
    """SHA-256 over the canonical config and the input files' content hashes."""
    h = hashlib.sha256()
    h.update(json.dumps(cfg.canonical_dict(), sort_keys=True).encode())
    for p in (cfg.source_path, cfg.target_path, cfg.source_test_path, cfg.target_test_path):
        if p is not None and Path(p).exists():
            h.update(_file_digest(p).encode())
            meta = Path(p + ".meta.json")
            if meta.exists():
                h.update(_file_digest(meta).encode())
    return h.hexdigest()
