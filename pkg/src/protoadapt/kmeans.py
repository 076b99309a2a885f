"""Seeded k-means clustering of one domain's embeddings.

Lloyd iterations with k-means++ seeding and best-of-n_init restarts. The
defaults mirror the common library behavior (n_init=10, max_iter=300,
tol=1e-4 scaled by the mean per-feature variance) but everything here is
self-contained so that results are bitwise reproducible across platforms,
library versions and thread counts:

- randomness comes from SplitMix64 (see rng.py); restart r uses seed
  (cfg.seed + r) mod 2^64;
- k-means++ picks the first center uniformly, then each next center with
  probability proportional to squared distance to the nearest chosen center;
- distances are computed on float32 inputs with float64 accumulation;
- the assignment and accumulation steps run over fixed-size chunks reduced
  in a fixed order, so worker count never changes the bytes of the result;
- an empty cluster is repaired by relocating it onto the point farthest from
  its currently assigned centroid (largest first, ties by lowest point
  index), skipping points whose departure would empty their own cluster.

Within one Lloyd run the inertia sequence is checked to be non-increasing
at every iteration.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embio import EmbeddingSet, read_embeddings, write_embeddings
from .errors import ConfigError, ShapeError
from .rng import SplitMix64

_CHUNK = 16384
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    seed: int = 0
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be a positive integer")
        if self.n_init < 1:
            raise ConfigError("n_init must be a positive integer")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


@dataclass(frozen=True)
class ClusterModel:
    """Centroids plus point-to-cluster assignments for one domain."""

    k: int
    dim: int
    centroids: np.ndarray  # (k, d) float32
    assignments: np.ndarray  # (n,) int32, every value in [0, k), no empty cluster
    inertia: float
    seed: int
    n_iter: int

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float32)
        a = np.ascontiguousarray(self.assignments, dtype=np.int32)
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "assignments", a)


def _chunked(n: int) -> list[slice]:
    return [slice(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]


def _map_ordered(fn, items, threads: int):
    """Apply fn over items, preserving order; thread count never affects results."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _sq_dists_to(X: np.ndarray, x_sq: np.ndarray, point: np.ndarray) -> np.ndarray:
    d2 = x_sq - 2.0 * (X @ point) + float(point @ point)
    np.maximum(d2, 0.0, out=d2)
    return d2


def kmeans_pp_indices(X: np.ndarray, x_sq: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    """k-means++ seeding: returns k distinct sample indices.

    First index is uniform; each later one is drawn with probability
    proportional to the squared distance to the nearest already-chosen
    center. If all remaining distances are zero (duplicate points), the
    lowest-index unchosen point is taken.
    """
    n = X.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.randint_below(n)
    d2 = _sq_dists_to(X, x_sq, X[chosen[0]])
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for c in range(1, k):
        cum = np.cumsum(d2)
        if cum[-1] > 0.0:
            idx = rng.choice_weighted(cum)
        else:
            idx = int(np.argmin(taken))  # first False
        chosen[c] = idx
        taken[idx] = True
        np.minimum(d2, _sq_dists_to(X, x_sq, X[idx]), out=d2)
    return chosen


def _assign_chunk(args):
    X_chunk, x_sq_chunk, centers, c_sq = args
    d2 = x_sq_chunk[:, None] + c_sq[None, :] - 2.0 * (X_chunk @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    best = d2[np.arange(len(labels)), labels]
    return labels.astype(np.int32), best


def _assign(X, x_sq, centers, threads) -> tuple[np.ndarray, np.ndarray]:
    c_sq = np.einsum("ij,ij->i", centers, centers)
    parts = _map_ordered(
        _assign_chunk,
        [(X[s], x_sq[s], centers, c_sq) for s in _chunked(X.shape[0])],
        threads,
    )
    labels = np.concatenate([p[0] for p in parts])
    best = np.concatenate([p[1] for p in parts])
    return labels, best


def _accumulate_chunk(args):
    X_chunk, labels_chunk, k = args
    sums = np.zeros((k, X_chunk.shape[1]), dtype=np.float64)
    np.add.at(sums, labels_chunk, X_chunk)
    counts = np.bincount(labels_chunk, minlength=k).astype(np.int64)
    return sums, counts


def _cluster_means(X, labels, k, threads) -> tuple[np.ndarray, np.ndarray]:
    parts = _map_ordered(
        _accumulate_chunk,
        [(X[s], labels[s], k) for s in _chunked(X.shape[0])],
        threads,
    )
    sums = np.zeros((k, X.shape[1]), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for s, c in parts:  # fixed chunk order
        sums += s
        counts += c
    return sums, counts


def _lloyd_run(
    X: np.ndarray,
    x_sq: np.ndarray,
    centers0: np.ndarray,
    k: int,
    max_iter: int,
    tol_abs: float,
    threads: int,
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    """One Lloyd run from given initial centers (all float64).

    Returns (centers, labels, inertia, n_iter, inertia_trace); the trace is
    asserted non-increasing as it is built.
    """
    centers = centers0.copy()
    trace: list[float] = []
    prev = np.inf
    n_iter = 0
    labels = None
    for _ in range(max_iter):
        n_iter += 1
        labels, best_d2 = _assign(X, x_sq, centers, threads)
        _fix_empty(labels, best_d2, centers, X, k)
        inertia = float(np.sum(best_d2))
        if not inertia <= prev * (1.0 + 1e-12) + 1e-12:
            raise AssertionError(f"inertia increased within a Lloyd run: {prev} -> {inertia}")
        trace.append(inertia)
        prev = inertia
        sums, counts = _cluster_means(X, labels, k, threads)
        new_centers = sums / counts[:, None]
        shift = float(np.linalg.norm(new_centers - centers))
        centers = new_centers
        if shift <= tol_abs:
            break
    return centers, labels, trace[-1], n_iter, trace


def _fix_empty(labels, best_d2, centers, X, k) -> None:
    """Empty-cluster repair; mutates labels, best_d2 and centers in place."""
    counts = np.bincount(labels, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return
    order = np.lexsort((np.arange(len(labels)), -best_d2))
    pos = 0
    for j in empties:
        while pos < len(order) and counts[labels[order[pos]]] <= 1:
            pos += 1
        if pos >= len(order):
            break  # unreachable for k <= n, kept as a guard
        p = int(order[pos])
        pos += 1
        counts[labels[p]] -= 1
        counts[j] += 1
        labels[p] = np.int32(j)
        centers[j] = X[p]
        best_d2[p] = 0.0


def fit_kmeans(emb: EmbeddingSet, cfg: KMeansConfig, *, threads: int = 1) -> ClusterModel:
    """Cluster `emb` into cfg.k clusters, returning the best of cfg.n_init runs.

    Deterministic for fixed (emb, cfg) at any thread count.
    """
    model, _ = fit_kmeans_with_traces(emb, cfg, threads=threads)
    return model


def fit_kmeans_with_traces(
    emb: EmbeddingSet, cfg: KMeansConfig, *, threads: int = 1
) -> tuple[ClusterModel, list[list[float]]]:
    """Like fit_kmeans but also returns the per-restart inertia traces."""
    n = emb.n
    if cfg.k > n:
        raise ConfigError(f"k={cfg.k} exceeds the number of samples n={n}")
    X = emb.vectors.astype(np.float64)
    x_sq = np.einsum("ij,ij->i", X, X)
    tol_abs = cfg.tol * float(np.mean(np.var(X, axis=0)))

    best = None  # (inertia, restart, centers, labels, n_iter)
    traces: list[list[float]] = []
    for r in range(cfg.n_init):
        rng = SplitMix64((cfg.seed + r) & _MASK64)
        idx = kmeans_pp_indices(X, x_sq, cfg.k, rng)
        centers0 = X[idx].copy()
        centers, labels, inertia, n_iter, trace = _lloyd_run(
            X, x_sq, centers0, cfg.k, cfg.max_iter, tol_abs, threads
        )
        traces.append(trace)
        if best is None or inertia < best[0]:
            best = (inertia, r, centers, labels, n_iter)

    # Finalize the winner against float32 centroids so the stored inertia is
    # consistent with the stored (quantized) centroids.
    _, _, centers, _, n_iter = best
    centroids32 = centers.astype(np.float32)
    eval_centers = centroids32.astype(np.float64)
    labels, best_d2 = _assign(X, x_sq, eval_centers, threads)
    _fix_empty(labels, best_d2, centroids32, emb.vectors, cfg.k)
    inertia = float(np.sum(best_d2))

    model = ClusterModel(
        k=cfg.k,
        dim=emb.dim,
        centroids=centroids32,
        assignments=labels,
        inertia=inertia,
        seed=cfg.seed,
        n_iter=n_iter,
    )
    return model, traces


def assign(model: ClusterModel, query: np.ndarray) -> int:
    """Index of the centroid nearest to `query` (squared L2, ties -> lowest index)."""
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != model.dim:
        raise ShapeError(f"query has dim {q.shape[0]}, model expects {model.dim}")
    c = model.centroids.astype(np.float64)
    d2 = np.einsum("ij,ij->i", c, c) - 2.0 * (c @ q) + float(q @ q)
    return int(np.argmin(d2))


def compute_inertia(emb: EmbeddingSet, model: ClusterModel) -> float:
    """Recompute sum of squared distances of points to their assigned centroids."""
    X = emb.vectors.astype(np.float64)
    C = model.centroids.astype(np.float64)
    total = 0.0
    for s in _chunked(emb.n):
        diff = X[s] - C[model.assignments[s]]
        total += float(np.einsum("ij,ij->", diff, diff))
    return total


def save_cluster_model(
    model: ClusterModel, emb: EmbeddingSet, json_path: str | Path, emb_path: str | Path, **extra
) -> None:
    """Persist the model as an EMB1 centroid file plus a JSON description."""
    centroid_set = EmbeddingSet(
        domain_name=emb.domain_name,
        vectors=model.centroids,
        sample_ids=tuple(f"centroid_{j:05d}" for j in range(model.k)),
    )
    write_embeddings(centroid_set, emb_path)
    doc = {
        "k": model.k,
        "seed": model.seed,
        "inertia": model.inertia,
        "n_iter": model.n_iter,
        "assignments": [int(a) for a in model.assignments],
        **extra,
    }
    Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_cluster_model(json_path: str | Path, emb_path: str | Path) -> ClusterModel:
    doc = json.loads(Path(json_path).read_text(encoding="utf-8"))
    centroid_set = read_embeddings(emb_path)
    return ClusterModel(
        k=int(doc["k"]),
        dim=centroid_set.dim,
        centroids=centroid_set.vectors,
        assignments=np.asarray(doc["assignments"], dtype=np.int32),
        inertia=float(doc["inertia"]),
        seed=int(doc["seed"]),
        n_iter=int(doc["n_iter"]),
    )
