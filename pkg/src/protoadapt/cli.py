"""Command-line orchestration of the pipeline.

Subcommands wrap one stage each and are resumable: a stage whose output
artifact already exists with a matching configuration fingerprint is
skipped; a stale artifact is refused unless --force is given. All artifacts
land under the configured output directory with fixed names:

    clusters_<domain>_<seed>.json/.emb
    protos_<domain>_<seed>.json/.emb
    dst_<seed>.dst (+ .json header)
    mapping_<seed>.json
    predictions_<seed>.json
    eval.json
    report.json / report.html
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, config_fingerprint, load_config
from .distance import ClusteredDomain, build_distance_matrix, save_distance_matrix
from .embio import EmbeddingSet, read_embeddings
from .errors import ConfigError
from .kmeans import KMeansConfig, fit_kmeans, load_cluster_model, save_cluster_model
from .mapping import load_mapping, predict_batch, save_mapping, closest_mapping
from .pipeline import DomainData, evaluate
from .prototypes import (
    load_prototypes,
    prototype_sample_ids,
    retrieve_labels,
    save_prototypes,
    select_prototypes,
)
from .report import emit_html, nearest_prototype_report, save_reports


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", name) or "domain"


class _Stage:
    """Shared state for one subcommand invocation."""

    def __init__(self, args):
        self.cfg: PipelineConfig = load_config(
            args.config,
            seeds=[args.seed] if args.seed is not None else None,
            threads=args.threads,
            output_dir=args.output_dir,
        )
        self.force: bool = args.force
        self.out = Path(self.cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.fingerprint = config_fingerprint(self.cfg)
        self.source = read_embeddings(self.cfg.source_path)
        self.target = read_embeddings(self.cfg.target_path)
        s, t = _sanitize(self.source.domain_name), _sanitize(self.target.domain_name)
        if s == t:
            s, t = s + "_source", t + "_target"
        self.names = {"source": s, "target": t}

    def scoring_target(self) -> EmbeddingSet:
        if self.cfg.target_test_path:
            return read_embeddings(self.cfg.target_test_path)
        return self.target

    def path(self, name: str) -> Path:
        return self.out / name

    def up_to_date(self, *paths: Path) -> bool:
        """True if every artifact exists and carries the current fingerprint."""
        fps = []
        for p in paths:
            if not p.exists():
                return False
            if p.suffix == ".json":
                try:
                    fps.append(json.loads(p.read_text(encoding="utf-8")).get("config_fingerprint"))
                except json.JSONDecodeError:
                    return False
        stale = [fp for fp in fps if fp != self.fingerprint]
        if stale:
            if self.force:
                return False
            raise ConfigError(
                "existing artifacts were built from a different config/input "
                "(stale fingerprint); rerun with --force to overwrite"
            )
        return True


def cmd_cluster(stage: _Stage) -> None:
    cfg = stage.cfg
    for seed in cfg.seeds:
        for role in ("source", "target"):
            emb = getattr(stage, role)
            name = stage.names[role]
            jpath = stage.path(f"clusters_{name}_{seed}.json")
            epath = stage.path(f"clusters_{name}_{seed}.emb")
            if stage.up_to_date(jpath, epath):
                print(f"up-to-date: {jpath.name}")
                continue
            kcfg = KMeansConfig(
                k=cfg.k,
                seed=seed,
                n_init=cfg.kmeans.n_init,
                max_iter=cfg.kmeans.max_iter,
                tol=cfg.kmeans.tol,
            )
            model = fit_kmeans(emb, kcfg, threads=cfg.threads)
            save_cluster_model(model, emb, jpath, epath, config_fingerprint=stage.fingerprint)
            print(f"wrote {jpath.name} (inertia {model.inertia:.6g}, {model.n_iter} iterations)")


def _load_model(stage: _Stage, role: str, seed: int):
    name = stage.names[role]
    jpath = stage.path(f"clusters_{name}_{seed}.json")
    epath = stage.path(f"clusters_{name}_{seed}.emb")
    if not jpath.exists() or not epath.exists():
        raise ConfigError(f"missing cluster artifact {jpath.name}; run the cluster stage first")
    return load_cluster_model(jpath, epath)


def _load_protos(stage: _Stage, role: str, seed: int):
    name = stage.names[role]
    jpath = stage.path(f"protos_{name}_{seed}.json")
    epath = stage.path(f"protos_{name}_{seed}.emb")
    if not jpath.exists() or not epath.exists():
        raise ConfigError(f"missing prototype artifact {jpath.name}; run the prototypes stage first")
    return load_prototypes(jpath, epath)


def cmd_prototypes(stage: _Stage) -> None:
    cfg = stage.cfg
    for seed in cfg.seeds:
        for role in ("source", "target"):
            emb = getattr(stage, role)
            name = stage.names[role]
            jpath = stage.path(f"protos_{name}_{seed}.json")
            epath = stage.path(f"protos_{name}_{seed}.emb")
            if stage.up_to_date(jpath, epath):
                print(f"up-to-date: {jpath.name}")
                continue
            model = _load_model(stage, role, seed)
            protos = select_prototypes(
                emb, model, restrict_to_cluster=cfg.restrict_prototypes_to_cluster
            )
            if role == "source":
                protos = retrieve_labels(protos, emb, model, cfg.label_rule)
            save_prototypes(protos, emb, jpath, epath, config_fingerprint=stage.fingerprint)
            print(f"wrote {jpath.name}")


def cmd_match(stage: _Stage) -> None:
    cfg = stage.cfg
    for seed in cfg.seeds:
        dst_path = stage.path(f"dst_{seed}.dst")
        map_path = stage.path(f"mapping_{seed}.json")
        header_path = Path(str(dst_path) + ".json")
        done = [p for p in (header_path, map_path)]
        if all(p.exists() for p in done) and json.loads(header_path.read_text()).get("complete"):
            if stage.up_to_date(header_path, map_path):
                print(f"up-to-date: {dst_path.name}")
                continue
            dst_path.unlink(missing_ok=True)
            header_path.unlink(missing_ok=True)
        source = ClusteredDomain(
            stage.source, _load_model(stage, "source", seed), _load_protos(stage, "source", seed)
        )
        target = ClusteredDomain(
            stage.target, _load_model(stage, "target", seed), _load_protos(stage, "target", seed)
        )
        try:
            matrix = build_distance_matrix(
                source,
                target,
                metric=cfg.metric,
                params=cfg.sinkhorn,
                l2_on=cfg.l2_on,
                threads=cfg.threads,
                checkpoint_path=dst_path if cfg.metric == "sinkhorn_w2" else None,
                checkpoint_context={"config_fingerprint": stage.fingerprint},
            )
        except ConfigError:
            if not stage.force:
                raise
            dst_path.unlink(missing_ok=True)
            header_path.unlink(missing_ok=True)
            matrix = build_distance_matrix(
                source,
                target,
                metric=cfg.metric,
                params=cfg.sinkhorn,
                l2_on=cfg.l2_on,
                threads=cfg.threads,
                checkpoint_path=dst_path if cfg.metric == "sinkhorn_w2" else None,
                checkpoint_context={"config_fingerprint": stage.fingerprint},
            )
        save_distance_matrix(matrix, dst_path, config_fingerprint=stage.fingerprint)
        mapping = closest_mapping(matrix, source.protos.labels)
        save_mapping(mapping, map_path, config_fingerprint=stage.fingerprint)
        print(f"wrote {dst_path.name} ({matrix.converged_cells}/{matrix.values.size} converged)")
        print(f"wrote {map_path.name}")


def cmd_predict(stage: _Stage) -> None:
    cfg = stage.cfg
    queries = stage.scoring_target()
    for seed in cfg.seeds:
        out_path = stage.path(f"predictions_{seed}.json")
        if stage.up_to_date(out_path):
            print(f"up-to-date: {out_path.name}")
            continue
        protos = _load_protos(stage, "target", seed)
        map_path = stage.path(f"mapping_{seed}.json")
        if not map_path.exists():
            raise ConfigError(f"missing {map_path.name}; run the match stage first")
        mapping = load_mapping(map_path)
        preds = predict_batch(
            queries.vectors.astype(np.float64),
            protos,
            mapping.target_labels,
            query_ids=queries.sample_ids,
        )
        doc = {
            "config_fingerprint": stage.fingerprint,
            "domain": queries.domain_name,
            "predictions": [
                {
                    "query_id": p.query_id,
                    "predicted_label": p.predicted_label,
                    "nearest_prototype_index": p.nearest_prototype_index,
                    "distance": p.distance,
                }
                for p in preds
            ],
        }
        if queries.labels is not None:
            correct = sum(
                int(p.predicted_label == int(t)) for p, t in zip(preds, queries.labels)
            )
            doc["accuracy"] = correct / len(preds)
        out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {out_path.name}")


def cmd_evaluate(stage: _Stage) -> None:
    cfg = stage.cfg
    out_path = stage.path("eval.json")
    if stage.up_to_date(out_path):
        print(f"up-to-date: {out_path.name}")
        return
    pairs = [
        (
            DomainData(
                stage.source,
                read_embeddings(cfg.source_test_path) if cfg.source_test_path else None,
            ),
            DomainData(
                stage.target,
                read_embeddings(cfg.target_test_path) if cfg.target_test_path else None,
            ),
        )
    ]
    report = evaluate(pairs, cfg.seeds, cfg, threads=cfg.threads)
    report.save(out_path)
    for p in report.pairs:
        ci = f" +/- {p.ci95_halfwidth:.4f}" if p.ci95_halfwidth is not None else ""
        print(f"{p.source} -> {p.target} [{p.metric}]: accuracy {p.mean:.4f}{ci}")
    print(f"wrote {out_path.name}")


def cmd_report(stage: _Stage, num_queries: int, image_root: str | None, top_k: int) -> None:
    cfg = stage.cfg
    json_path = stage.path("report.json")
    html_path = stage.path("report.html")
    if stage.up_to_date(json_path) and html_path.exists():
        print(f"up-to-date: {json_path.name}")
        return
    seed = cfg.seeds[0]
    source_protos = _load_protos(stage, "source", seed)
    target_protos = _load_protos(stage, "target", seed)
    mapping = load_mapping(stage.path(f"mapping_{seed}.json"))
    queries = stage.scoring_target()
    n = min(num_queries, queries.n)
    reports = [
        nearest_prototype_report(
            queries.vectors[i],
            queries.sample_ids[i],
            queries.domain_name,
            source_protos,
            prototype_sample_ids(source_protos, stage.source),
            target_protos,
            prototype_sample_ids(target_protos, stage.target),
            mapping,
            source_domain=stage.source.domain_name,
            target_domain=queries.domain_name,
            true_label=int(queries.labels[i]) if queries.labels is not None else None,
            top_k=top_k,
        )
        for i in range(n)
    ]
    doc = [r.to_dict() for r in reports]
    json_path.write_text(
        json.dumps({"config_fingerprint": stage.fingerprint, "reports": doc}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    emit_html(reports, html_path, image_root=image_root)
    print(f"wrote {json_path.name} and {html_path.name}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoadapt",
        description="Prototype-based domain adaptation over frozen embeddings",
    )
    parser.add_argument("--config", required=True, help="JSON or TOML pipeline config")
    parser.add_argument("--seed", type=int, default=None, help="override the seed list with one seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results identical)")
    parser.add_argument("--force", action="store_true", help="overwrite stale artifacts")
    parser.add_argument("--output-dir", default=None, help="override the config output_dir")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("cluster", "prototypes", "match", "predict", "evaluate"):
        sub.add_parser(name)
    rep = sub.add_parser("report")
    rep.add_argument("--num-queries", type=int, default=8)
    rep.add_argument("--top-k", type=int, default=5)
    rep.add_argument("--image-root", default=None, help="resolve sample ids to thumbnails here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        stage = _Stage(args)
        if args.command == "cluster":
            cmd_cluster(stage)
        elif args.command == "prototypes":
            cmd_prototypes(stage)
        elif args.command == "match":
            cmd_match(stage)
        elif args.command == "predict":
            cmd_predict(stage)
        elif args.command == "evaluate":
            cmd_evaluate(stage)
        elif args.command == "report":
            cmd_report(stage, args.num_queries, args.image_root, args.top_k)
    except Exception as e:  # single-line machine-parsable failure
        msg = re.sub(r"\s+", " ", str(e)).strip()
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
