"""Interpretability reports: the nearest prototypes to a query, per domain.

For every query we list the top_k nearest prototypes in the query's own
domain and in the other domain, with cluster index, sample id, label and
Euclidean distance. Distances across domains live in the same embedding
space, so they compare like for like. Reports serialize to JSON and to one
self-contained HTML page; when an image root is supplied and a prototype's
sample id resolves to an image file, a thumbnail is embedded by relative
path, otherwise the cell stays textual.
"""

from __future__ import annotations

import html
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .mapping import DomainMapping, predict
from .prototypes import PrototypeSet

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".gif", ".webp", ".bmp"}


@dataclass(frozen=True)
class Neighbor:
    prototype_index: int
    sample_id: str
    label: int
    distance: float


@dataclass(frozen=True)
class NeighborReport:
    query_id: str
    query_domain: str
    true_label: int | None
    predicted_label: int
    neighbors: dict[str, tuple[Neighbor, ...]]  # domain name -> sorted neighbors
    truncated: bool = False  # top_k exceeded the available prototype count

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "query_domain": self.query_domain,
            "true_label": self.true_label,
            "predicted_label": self.predicted_label,
            "neighbors": {
                dom: [asdict(n) for n in ns] for dom, ns in sorted(self.neighbors.items())
            },
            "truncated": self.truncated,
        }


def _top_neighbors(
    query: np.ndarray,
    protos: PrototypeSet,
    labels: np.ndarray,
    sample_ids: tuple[str, ...],
    top_k: int,
) -> tuple[Neighbor, ...]:
    diff = protos.vectors.astype(np.float64) - query
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.lexsort((np.arange(protos.k), dist))[:top_k]
    return tuple(
        Neighbor(
            prototype_index=int(j),
            sample_id=sample_ids[int(j)],
            label=int(labels[int(j)]),
            distance=float(dist[int(j)]),
        )
        for j in order
    )


def nearest_prototype_report(
    query: np.ndarray,
    query_id: str,
    query_domain: str,
    source_protos: PrototypeSet,
    source_sample_ids: tuple[str, ...],
    target_protos: PrototypeSet,
    target_sample_ids: tuple[str, ...],
    mapping: DomainMapping,
    *,
    source_domain: str = "source",
    target_domain: str = "target",
    true_label: int | None = None,
    top_k: int = 5,
) -> NeighborReport:
    """Nearest prototypes per domain for one query, plus its prediction.

    The prediction follows the target route (nearest target prototype,
    transferred label) when the query belongs to the target domain, and the
    source route otherwise, consistent with `mapping.predict`.
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != source_protos.dim or q.shape[0] != target_protos.dim:
        raise ShapeError("query dimension does not match the prototype sets")
    if source_protos.labels is None:
        raise ShapeError("source prototypes must be labeled")

    truncated = top_k > source_protos.k or top_k > target_protos.k

    if query_domain == target_domain:
        pred = predict(q, target_protos, mapping.target_labels, query_id)
    else:
        pred = predict(q, source_protos, source_protos.labels, query_id)

    neighbors = {
        source_domain: _top_neighbors(
            q, source_protos, source_protos.labels, source_sample_ids, min(top_k, source_protos.k)
        ),
        target_domain: _top_neighbors(
            q, target_protos, mapping.target_labels, target_sample_ids, min(top_k, target_protos.k)
        ),
    }
    return NeighborReport(
        query_id=query_id,
        query_domain=query_domain,
        true_label=true_label,
        predicted_label=pred.predicted_label,
        neighbors=neighbors,
        truncated=truncated,
    )


def save_reports(reports: list[NeighborReport], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _cell(n: Neighbor, image_root: Path | None, html_dir: Path) -> str:
    caption = (
        f"cluster {n.prototype_index} &middot; label {n.label}"
        f"<br>{html.escape(n.sample_id)}<br>d = {n.distance:.4f}"
    )
    if image_root is not None:
        candidate = image_root / n.sample_id
        if candidate.suffix.lower() in _IMAGE_SUFFIXES and candidate.is_file():
            # relative to the page so the report stays portable next to its images
            src = html.escape(os.path.relpath(candidate, start=html_dir))
            return f'<td><img src="{src}" alt=""><br>{caption}</td>'
    return f"<td>{caption}</td>"


def emit_html(
    reports: list[NeighborReport], path: str | Path, image_root: str | Path | None = None
) -> None:
    """Render reports as one self-contained HTML page (deterministic bytes)."""
    root = Path(image_root) if image_root is not None else None
    parts = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'><title>Nearest prototypes</title>",
        "<style>",
        "body{font-family:sans-serif;margin:1.5em}",
        "table{border-collapse:collapse;margin-bottom:1.5em}",
        "td,th{border:1px solid #999;padding:6px;vertical-align:top;font-size:12px}",
        "img{max-width:96px;max-height:96px;display:block}",
        ".wrong{background:#ffe8e8}.right{background:#e8ffe8}",
        "</style></head><body>",
        "<h1>Nearest prototypes</h1>",
    ]
    if not reports:
        parts.append("<p>no queries</p>")
    for r in reports:
        verdict = ""
        if r.true_label is not None:
            verdict = " right" if r.predicted_label == r.true_label else " wrong"
        true_txt = "?" if r.true_label is None else str(r.true_label)
        parts.append(
            f"<h2 class='{verdict.strip() or 'query'}'>query {html.escape(r.query_id)} "
            f"({html.escape(r.query_domain)}) &ndash; predicted {r.predicted_label}, "
            f"true {true_txt}</h2>"
        )
        parts.append("<table>")
        for dom in sorted(r.neighbors):
            cells = "".join(_cell(n, root, Path(path).parent) for n in r.neighbors[dom])
            parts.append(f"<tr><th>{html.escape(dom)}</th>{cells}</tr>")
        parts.append("</table>")
    parts.append("</body></html>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
