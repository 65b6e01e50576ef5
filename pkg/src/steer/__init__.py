"""Privacy-preserving vector retrieval via embedding-space alignment.

Learn a transform from a local embedding space into a server embedding
space from paired examples, send only the transformed (approximate)
queries to the server, and measure both what that costs in Recall@k and
what it buys in deviation from the true embeddings.
"""

import os as _os


def _cap_threads() -> None:
    """Honor STEER_THREADS before any BLAS-backed import (0 or unset = auto)."""
    raw = _os.environ.get("STEER_THREADS", "").strip()
    if raw.isdigit() and raw != "0":
        for var in (
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "OMP_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            _os.environ.setdefault(var, raw)


_cap_threads()

__version__ = "0.1.0"

from .core import (  # noqa: E402
    AlignmentPairs,
    Diagnostic,
    EmbeddingSet,
    cosine_similarity,
    ensure_valid_pairs,
    l2_normalize,
    row_cosines,
    validate_pairs,
)
from .errors import (  # noqa: E402
    BadMagicError,
    ConfigError,
    DegenerateVectorError,
    DimensionMismatchError,
    FileFormatError,
    HeaderError,
    IdCountMismatchError,
    IdMismatchError,
    InputError,
    NumericalError,
    PairValidationError,
    ParamCountMismatchError,
    QrelsParseError,
    RankDeficiencyError,
    SteerError,
    TargetUnreachableError,
    TrainingDivergedError,
    TruncatedPayloadError,
    UnderdeterminedWarning,
    UnknownKindError,
    VersionMismatchError,
)
from .formats import (  # noqa: E402
    convert_text_matrix,
    read_emb,
    read_model,
    read_model_header,
    read_qrels,
    read_run,
    write_emb,
    write_model,
    write_qrels,
    write_run,
)
from .linear import LinearMap, apply_linear, fit_linear  # noqa: E402
from .mlp import (  # noqa: E402
    LossBreakdown,
    MlpModel,
    TrainConfig,
    apply_mlp,
    composite_loss,
    init_mlp,
    loss,
    loss_gradient,
    mlp_forward,
    train_mlp,
)
from .privacy import (  # noqa: E402
    DeviationReport,
    MatchedExposureReport,
    add_gaussian_noise,
    deviation_report,
    matched_exposure_comparison,
)
from .retrieval import (  # noqa: E402
    Qrels,
    RecallReport,
    RetrievalRun,
    RunComparison,
    compare_runs,
    recall_at_k,
    search_topk,
)
from .synth import (  # noqa: E402
    GroundTruthMap,
    RetrievalTask,
    SynthSpec,
    generate_pairs,
    generate_retrieval_task,
    read_ground_truth,
    write_ground_truth,
)

__all__ = [
    "__version__",
    "AlignmentPairs",
    "BadMagicError",
    "ConfigError",
    "DegenerateVectorError",
    "Diagnostic",
    "DimensionMismatchError",
    "DeviationReport",
    "EmbeddingSet",
    "FileFormatError",
    "GroundTruthMap",
    "HeaderError",
    "IdCountMismatchError",
    "IdMismatchError",
    "InputError",
    "LinearMap",
    "LossBreakdown",
    "MatchedExposureReport",
    "MlpModel",
    "NumericalError",
    "PairValidationError",
    "ParamCountMismatchError",
    "Qrels",
    "QrelsParseError",
    "RankDeficiencyError",
    "RecallReport",
    "RetrievalRun",
    "RetrievalTask",
    "RunComparison",
    "SteerError",
    "SynthSpec",
    "TargetUnreachableError",
    "TrainConfig",
    "TrainingDivergedError",
    "TruncatedPayloadError",
    "UnderdeterminedWarning",
    "UnknownKindError",
    "VersionMismatchError",
    "add_gaussian_noise",
    "apply_linear",
    "apply_mlp",
    "compare_runs",
    "composite_loss",
    "convert_text_matrix",
    "cosine_similarity",
    "deviation_report",
    "ensure_valid_pairs",
    "fit_linear",
    "generate_pairs",
    "generate_retrieval_task",
    "init_mlp",
    "l2_normalize",
    "loss",
    "loss_gradient",
    "matched_exposure_comparison",
    "mlp_forward",
    "read_emb",
    "read_ground_truth",
    "read_model",
    "read_model_header",
    "read_qrels",
    "read_run",
    "recall_at_k",
    "row_cosines",
    "search_topk",
    "train_mlp",
    "validate_pairs",
    "write_emb",
    "write_ground_truth",
    "write_model",
    "write_qrels",
    "write_run",
]
