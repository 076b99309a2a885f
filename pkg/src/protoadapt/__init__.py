"""Prototype-based unsupervised domain adaptation over frozen embeddings.

The pipeline: cluster each domain's embeddings with seeded k-means, take the
nearest real sample to each centroid as the cluster's prototype, match
clusters across domains with L2 centroid distance or the debiased Sinkhorn
divergence between member point clouds, transfer source labels to target
clusters through the closest match, and classify queries by their nearest
prototype.
"""

from .config import KMeansSettings, PipelineConfig, config_fingerprint, load_config
from .distance import (
    ClusteredDomain,
    DistanceMatrix,
    SinkhornParams,
    SinkhornResult,
    build_distance_matrix,
    l2_centroid_distance,
    load_distance_matrix,
    save_distance_matrix,
    sinkhorn_divergence,
    sinkhorn_divergence_with_info,
    transport_plan,
)
from .embio import EmbeddingSet, read_embeddings, write_embeddings
from .errors import (
    ConfigError,
    FormatError,
    MissingLabelsError,
    ShapeError,
    TruncationError,
    ValidationError,
)
from .kmeans import (
    ClusterModel,
    KMeansConfig,
    assign,
    compute_inertia,
    fit_kmeans,
    fit_kmeans_with_traces,
    load_cluster_model,
    save_cluster_model,
)
from .mapping import (
    DomainMapping,
    Prediction,
    closest_mapping,
    load_mapping,
    predict,
    predict_batch,
    predicted_labels,
    save_mapping,
)
from .pipeline import (
    DomainData,
    EvaluationReport,
    PairReport,
    PipelineResult,
    evaluate,
    run_pipeline,
    student_t_halfwidth,
)
from .prototypes import (
    PrototypeSet,
    load_prototypes,
    majority_labels,
    prototype_sample_ids,
    retrieve_labels,
    save_prototypes,
    select_prototypes,
)
from .report import NeighborReport, emit_html, nearest_prototype_report, save_reports

__version__ = "0.1.0"
