"""End-to-end pipeline composition and the multi-seed evaluation harness.

One pipeline run clusters both domains, picks and labels prototypes, builds
the inter-cluster distance matrix and transfers labels to the target
clusters. The evaluator repeats this for every (source, target) pair and
every seed, scores nearest-prototype predictions on the target domain
(target labels are used for scoring only) and reports per-pair mean accuracy
with a 95% Student-t confidence half-width across seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .config import PipelineConfig, config_fingerprint
from .distance import ClusteredDomain, DistanceMatrix, build_distance_matrix
from .embio import EmbeddingSet
from .errors import ConfigError, MissingLabelsError
from .kmeans import ClusterModel, KMeansConfig, fit_kmeans
from .mapping import DomainMapping, closest_mapping, predicted_labels
from .prototypes import PrototypeSet, retrieve_labels, select_prototypes


@dataclass(frozen=True)
class PipelineResult:
    source_model: ClusterModel
    target_model: ClusterModel
    source_protos: PrototypeSet  # labeled
    target_protos: PrototypeSet  # unlabeled; labels live in mapping
    matrix: DistanceMatrix
    mapping: DomainMapping

    @property
    def target_labels(self) -> np.ndarray:
        return self.mapping.target_labels


@dataclass(frozen=True)
class DomainData:
    """A domain's training set plus an optional held-out test split."""

    train: EmbeddingSet
    test: EmbeddingSet | None = None

    @property
    def scoring_set(self) -> EmbeddingSet:
        return self.test if self.test is not None else self.train


def run_pipeline(
    source: EmbeddingSet,
    target: EmbeddingSet,
    seed: int,
    cfg: PipelineConfig,
    *,
    threads: int = 1,
    checkpoint_path: str | Path | None = None,
) -> PipelineResult:
    """Cluster, select prototypes, match clusters and transfer labels."""
    if source.labels is None:
        raise MissingLabelsError("source domain must be labeled")
    k = cfg.k
    if k > min(source.n, target.n):
        raise ConfigError(
            f"k={k} (clusters_per_class x num_classes) exceeds the smaller domain size "
            f"min({source.n}, {target.n})"
        )
    kcfg = KMeansConfig(
        k=k,
        seed=seed,
        n_init=cfg.kmeans.n_init,
        max_iter=cfg.kmeans.max_iter,
        tol=cfg.kmeans.tol,
    )
    source_model = fit_kmeans(source, kcfg, threads=threads)
    target_model = fit_kmeans(target, kcfg, threads=threads)

    source_protos = select_prototypes(
        source, source_model, restrict_to_cluster=cfg.restrict_prototypes_to_cluster
    )
    source_protos = retrieve_labels(source_protos, source, source_model, cfg.label_rule)
    target_protos = select_prototypes(
        target, target_model, restrict_to_cluster=cfg.restrict_prototypes_to_cluster
    )

    matrix = build_distance_matrix(
        ClusteredDomain(source, source_model, source_protos),
        ClusteredDomain(target, target_model, target_protos),
        metric=cfg.metric,
        params=cfg.sinkhorn,
        l2_on=cfg.l2_on,
        threads=threads,
        checkpoint_path=checkpoint_path,
    )
    mapping = closest_mapping(matrix, source_protos.labels)
    return PipelineResult(
        source_model=source_model,
        target_model=target_model,
        source_protos=source_protos,
        target_protos=target_protos,
        matrix=matrix,
        mapping=mapping,
    )


@dataclass(frozen=True)
class PairReport:
    source: str
    target: str
    metric: str
    seeds: tuple[int, ...]
    accuracies: tuple[float, ...]  # target accuracy per seed
    mean: float
    ci95_halfwidth: float | None
    source_accuracies: tuple[float, ...]  # source self-accuracy per seed
    source_mean: float
    split: str  # "heldout" or "full"


@dataclass(frozen=True)
class EvaluationReport:
    pairs: tuple[PairReport, ...]
    config_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {
                    "source": p.source,
                    "target": p.target,
                    "metric": p.metric,
                    "seeds": list(p.seeds),
                    "accuracies": list(p.accuracies),
                    "mean": p.mean,
                    "ci95_halfwidth": p.ci95_halfwidth,
                    "source_accuracies": list(p.source_accuracies),
                    "source_mean": p.source_mean,
                    "split": p.split,
                }
                for p in self.pairs
            ],
            "config_fingerprint": self.config_fingerprint,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _accuracy(queries: EmbeddingSet, protos: PrototypeSet, labels: np.ndarray) -> float:
    if queries.labels is None:
        raise MissingLabelsError(f"scoring set {queries.domain_name!r} has no labels")
    pred = predicted_labels(queries.vectors.astype(np.float64), protos, labels)
    return float(np.mean(pred == queries.labels))


def student_t_halfwidth(values: np.ndarray) -> float | None:
    """95% two-sided Student-t confidence half-width; None below two samples."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        return None
    if np.ptp(values) == 0.0:  # identical samples: exactly zero, no rounding residue
        return 0.0
    sd = float(np.std(values, ddof=1))
    t = float(stats.t.ppf(0.975, n - 1))
    return float(t * sd / np.sqrt(n))


def evaluate(
    pairs: list[tuple[DomainData, DomainData]],
    seeds: tuple[int, ...],
    cfg: PipelineConfig,
    *,
    threads: int = 1,
) -> EvaluationReport:
    """Run the full pipeline for every pair and seed; score target accuracy."""
    reports = []
    for src, tgt in pairs:
        accs: list[float] = []
        src_accs: list[float] = []
        for seed in seeds:
            result = run_pipeline(src.train, tgt.train, seed, cfg, threads=threads)
            accs.append(_accuracy(tgt.scoring_set, result.target_protos, result.target_labels))
            src_accs.append(
                _accuracy(src.scoring_set, result.source_protos, result.source_protos.labels)
            )
        acc_arr = np.asarray(accs)
        reports.append(
            PairReport(
                source=src.train.domain_name,
                target=tgt.train.domain_name,
                metric=cfg.metric,
                seeds=tuple(seeds),
                accuracies=tuple(accs),
                mean=float(acc_arr.mean()),
                ci95_halfwidth=student_t_halfwidth(acc_arr),
                source_accuracies=tuple(src_accs),
                source_mean=float(np.mean(src_accs)),
                split="heldout" if tgt.test is not None else "full",
            )
        )
    return EvaluationReport(pairs=tuple(reports), config_fingerprint=config_fingerprint(cfg))
