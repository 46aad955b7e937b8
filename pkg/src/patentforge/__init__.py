"""patentforge: language-model embeddings for patent technology codes.

Train a small masked-token encoder over patent titles, abstracts, and
classification codes, read per-code context embeddings out of it, and
score code pairs for vocabulary convergence years before the codes
first co-occur on a patent.  A Chung-Lu bipartite null model turns
later co-occurrence counts into innovation labels for backtesting.

The usual entry points:

- :func:`load_corpus` / :func:`generate_synthetic` for data,
- :func:`build_tokenizer`, :func:`train`, :func:`extract_embeddings`
  for the model,
- :func:`context_similarity` / :func:`cs_timeseries` for pair scores,
- :func:`run_backtest` for the forecasting evaluation,
- :class:`ExperimentConfig` + :func:`run_pipeline` (or the ``forge``
  command) to run everything from one config.
"""

from .corpus import (
    Corpus,
    PatentRecord,
    TimeWindow,
    code_support,
    load_corpus,
    parse_corpus,
    save_corpus,
    serialize_corpus,
    truncate_code,
    window_slice,
    year_ordered_split,
)
from .errors import (
    ConfigError,
    CorruptCheckpoint,
    CorruptStore,
    CountMismatch,
    DegenerateSigma,
    DimMismatch,
    DivergenceDetected,
    DuplicateId,
    EmptyCorpus,
    EmptyStore,
    ForgeError,
    InfeasibleSpec,
    InsufficientCandidates,
    InsufficientCodes,
    KeyMismatch,
    MalformedCode,
    MissingResults,
    NoEmbeddings,
    NoMaskedPositions,
    NoRelevant,
    ParseError,
    SelfPair,
    ShapeMismatch,
    SingleClass,
    TooManyCodes,
    UnknownCode,
    ZeroVector,
)
from .evaluation import (
    BacktestConfig,
    BacktestResult,
    SyntheticSpec,
    auc_roc,
    citation_eval,
    classification_metrics,
    generate_synthetic,
    ipc_eval,
    knn_classify,
    knn_ipc_eval,
    match_eval,
    retrieval_metrics,
    run_backtest,
    title_abstract_eval,
    tune_threshold,
)
from .model import (
    EmbeddingStore,
    ModelConfig,
    Tokenizer,
    TrainConfig,
    build_tokenizer,
    encode_patent,
    encode_text_cls,
    extract_embeddings,
    forward,
    grad_check,
    load_checkpoint,
    masked_accuracy,
    merge_stores,
    predict_codes,
    save_checkpoint,
    train,
)
from .nullmodel import (
    LinkProbabilities,
    candidate_pairs,
    canonical_pair,
    chung_lu_stats,
    cooccurrence_counts,
    degrees,
    k_for_imbalance,
    label_innovations,
    monte_carlo_null,
    pair_stats_table,
    poisson_binomial_pvalue,
    poisson_binomial_pvalues_batch,
    poisson_binomial_tail,
)
from .pipeline import ExperimentConfig, run_pipeline
from .similarity import (
    CSConfig,
    CSSeries,
    context_similarity,
    cosine,
    cs_mean,
    cs_timeseries,
    cs_topx,
    random_pair_baseline,
    smooth_series,
)

__version__ = "0.1.0"

__all__ = [
    "auc_roc",
    "BacktestConfig",
    "BacktestResult",
    "build_tokenizer",
    "candidate_pairs",
    "canonical_pair",
    "chung_lu_stats",
    "citation_eval",
    "classification_metrics",
    "code_support",
    "ConfigError",
    "context_similarity",
    "cooccurrence_counts",
    "Corpus",
    "CorruptCheckpoint",
    "CorruptStore",
    "cosine",
    "CountMismatch",
    "cs_mean",
    "cs_timeseries",
    "cs_topx",
    "CSConfig",
    "CSSeries",
    "DegenerateSigma",
    "degrees",
    "DimMismatch",
    "DivergenceDetected",
    "DuplicateId",
    "EmbeddingStore",
    "EmptyCorpus",
    "EmptyStore",
    "encode_patent",
    "encode_text_cls",
    "ExperimentConfig",
    "extract_embeddings",
    "ForgeError",
    "forward",
    "generate_synthetic",
    "grad_check",
    "InfeasibleSpec",
    "InsufficientCandidates",
    "InsufficientCodes",
    "ipc_eval",
    "k_for_imbalance",
    "KeyMismatch",
    "knn_classify",
    "knn_ipc_eval",
    "label_innovations",
    "LinkProbabilities",
    "load_checkpoint",
    "load_corpus",
    "MalformedCode",
    "masked_accuracy",
    "match_eval",
    "merge_stores",
    "MissingResults",
    "ModelConfig",
    "monte_carlo_null",
    "NoEmbeddings",
    "NoMaskedPositions",
    "NoRelevant",
    "pair_stats_table",
    "parse_corpus",
    "ParseError",
    "PatentRecord",
    "poisson_binomial_pvalue",
    "poisson_binomial_pvalues_batch",
    "poisson_binomial_tail",
    "predict_codes",
    "random_pair_baseline",
    "retrieval_metrics",
    "run_backtest",
    "run_pipeline",
    "save_checkpoint",
    "save_corpus",
    "SelfPair",
    "serialize_corpus",
    "ShapeMismatch",
    "SingleClass",
    "smooth_series",
    "SyntheticSpec",
    "TimeWindow",
    "title_abstract_eval",
    "Tokenizer",
    "TooManyCodes",
    "train",
    "TrainConfig",
    "truncate_code",
    "tune_threshold",
    "UnknownCode",
    "window_slice",
    "year_ordered_split",
    "ZeroVector",
]
