"""Multi-party learning on shared dimensionality-reduced representations.

Parties keep raw rows local and exchange only reduced, optionally
permuted intermediate representations plus a synthetic anchor dataset;
a master aligns the representations in a common space, fits one shared
model, and hands back anchor-level predictions each party distills into
a local model. ``audit`` quantifies what the transmitted artifacts leak,
``netproto`` runs the exchange over sockets, ``plots`` and ``cli`` are
importable on demand.
"""

from .anchor import AnchorSet, assemble_anchor, default_anchor_rank, local_anchor
from .audit import (
    AuditReport,
    DistinctnessReport,
    audit_share,
    correlation_audit,
    format_audit_report,
    linkage_attack,
    reconstruction_distinctness,
    simulate_share_audit,
)
from .dataio import (
    FeatureSchema,
    LabeledDataset,
    horizontal_split,
    load_csv,
    one_hot,
    parse_schema_file,
    save_csv,
    synth_hospital,
    write_schema_file,
)
from .errors import (
    ConfigurationError,
    DcollabError,
    FramingError,
    MissingCapabilityError,
    ProtocolError,
)
from .master import (
    CollabMaps,
    CollabModel,
    assemble_collab,
    compute_collab_maps,
    default_m_hat,
    fit_collab_model,
    predict_anchor,
)
from .matrixkit import RandomSource, pca, pseudo_inverse, ridge_fit, ridge_predict, truncated_svd
from .netproto import MasterSummary, WorkerOutcome, run_worker, serve_master
from .pipeline import (
    MODES,
    ExperimentReport,
    PredictionResult,
    RunConfig,
    Seeds,
    auc,
    experiment,
    format_report_table,
    run,
    trial_split,
    write_report_csv,
)
from .worker import (
    IntermediateShare,
    LocalDistilledModel,
    SealedMapReplay,
    WorkerMap,
    encode_share,
    fit_local_model,
    make_map,
    make_share,
    predict_local,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "AuditReport",
    "CollabMaps",
    "CollabModel",
    "ConfigurationError",
    "DcollabError",
    "DistinctnessReport",
    "ExperimentReport",
    "FeatureSchema",
    "FramingError",
    "IntermediateShare",
    "LabeledDataset",
    "LocalDistilledModel",
    "MODES",
    "MasterSummary",
    "MissingCapabilityError",
    "PredictionResult",
    "ProtocolError",
    "RandomSource",
    "RunConfig",
    "SealedMapReplay",
    "Seeds",
    "WorkerMap",
    "WorkerOutcome",
    "assemble_anchor",
    "assemble_collab",
    "auc",
    "audit_share",
    "compute_collab_maps",
    "correlation_audit",
    "default_anchor_rank",
    "default_m_hat",
    "encode_share",
    "experiment",
    "fit_collab_model",
    "fit_local_model",
    "format_audit_report",
    "format_report_table",
    "horizontal_split",
    "linkage_attack",
    "load_csv",
    "local_anchor",
    "make_map",
    "make_share",
    "one_hot",
    "parse_schema_file",
    "pca",
    "predict_anchor",
    "predict_local",
    "pseudo_inverse",
    "reconstruction_distinctness",
    "ridge_fit",
    "ridge_predict",
    "run",
    "run_worker",
    "save_csv",
    "serve_master",
    "simulate_share_audit",
    "synth_hospital",
    "trial_split",
    "truncated_svd",
    "write_report_csv",
    "write_schema_file",
]
