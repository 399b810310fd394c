"""Region-disaggregated realism and diversity metrics for generated-image
embeddings, measured over k-nearest-neighbor hypersphere manifolds in three
views per image: full image, object only, background only.
"""

from .analysis import (
    FAILURE_MODES,
    ComparisonEntry,
    ComparisonTable,
    DisparityStats,
    FailureModeHit,
    MetricSpread,
    RunMembership,
    RunReport,
    SkippedCell,
    classify_low_diversity,
    compare_runs,
    comparison_to_csv,
    comparison_to_json,
    compute_run,
    compute_run_details,
    disparity_stats,
    mine_failure_modes,
    mine_low_diversity,
    mine_low_realism,
    report_dumps,
    report_from_json,
    report_to_json,
    round_half_away_from_zero,
    sample_hits,
)
from .decompose import (
    AttentionMaskSpec,
    PatchPartition,
    PixelMask,
    partition_mask,
    read_pgm,
    to_attention_spec,
    write_pgm,
)
from .embedstore import (
    VIEWS,
    BalanceDeficit,
    EmbeddingRecord,
    EmbeddingSet,
    SliceQuery,
    load_dataset,
    read_embedding_file,
    read_manifest,
    slice_set,
    validate_class_balance,
    write_dataset,
    write_embedding_file,
    write_manifest,
)
from .errors import (
    ComputationError,
    ConfigError,
    ConfigMismatch,
    DataFormatError,
    DdigError,
    DimensionMismatch,
    IndivisibleGrid,
    IoFailure,
    MagicMismatch,
    MalformedMask,
    ManifestMismatch,
    ManifestNotFound,
    NonFiniteValue,
    SingleRegion,
    TooFewPoints,
    TruncatedPayload,
    VersionUnsupported,
    ZeroDenominator,
)
from .manifold import (
    DEFAULT_K,
    Manifold,
    MembershipMatrix,
    MembershipProfile,
    MetricResult,
    OracleResult,
    brute_force_oracle,
    build_manifold,
    compute_metrics,
    coverage,
    membership,
    membership_profile,
    precision,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionMaskSpec",
    "BalanceDeficit",
    "ComparisonEntry",
    "ComparisonTable",
    "ComputationError",
    "ConfigError",
    "ConfigMismatch",
    "DEFAULT_K",
    "DataFormatError",
    "DdigError",
    "DimensionMismatch",
    "DisparityStats",
    "EmbeddingRecord",
    "EmbeddingSet",
    "FAILURE_MODES",
    "FailureModeHit",
    "IndivisibleGrid",
    "IoFailure",
    "MagicMismatch",
    "MalformedMask",
    "Manifold",
    "ManifestMismatch",
    "ManifestNotFound",
    "MembershipMatrix",
    "MembershipProfile",
    "MetricResult",
    "MetricSpread",
    "NonFiniteValue",
    "OracleResult",
    "PatchPartition",
    "PixelMask",
    "RunMembership",
    "RunReport",
    "SingleRegion",
    "SkippedCell",
    "SliceQuery",
    "TooFewPoints",
    "TruncatedPayload",
    "VIEWS",
    "VersionUnsupported",
    "ZeroDenominator",
    "brute_force_oracle",
    "build_manifold",
    "classify_low_diversity",
    "compare_runs",
    "comparison_to_csv",
    "comparison_to_json",
    "compute_metrics",
    "compute_run",
    "compute_run_details",
    "coverage",
    "disparity_stats",
    "load_dataset",
    "membership",
    "membership_profile",
    "mine_failure_modes",
    "mine_low_diversity",
    "mine_low_realism",
    "partition_mask",
    "precision",
    "read_embedding_file",
    "read_manifest",
    "read_pgm",
    "report_dumps",
    "report_from_json",
    "report_to_json",
    "round_half_away_from_zero",
    "sample_hits",
    "slice_set",
    "to_attention_spec",
    "validate_class_balance",
    "write_dataset",
    "write_embedding_file",
    "write_manifest",
    "write_pgm",
]
