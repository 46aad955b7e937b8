from .backtest import (
    BacktestConfig,
    BacktestResult,
    WindowResult,
    permutation_aucs,
    run_backtest,
)
from .metrics import (
    auc_roc,
    average_precision,
    average_ranks,
    classification_metrics,
    first_relevant_rank,
    knn_classify,
    match_eval,
    retrieval_metrics,
)
from .synthetic import (
    PlantedPair,
    SyntheticCorpus,
    SyntheticSpec,
    drift_schedule,
    generate_synthetic,
    make_codes,
)
from .tasks import (
    THRESHOLD_GRID,
    citation_eval,
    ipc_eval,
    knn_ipc_eval,
    title_abstract_eval,
    tune_threshold,
)

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "PlantedPair",
    "SyntheticCorpus",
    "SyntheticSpec",
    "THRESHOLD_GRID",
    "WindowResult",
    "auc_roc",
    "average_precision",
    "average_ranks",
    "citation_eval",
    "classification_metrics",
    "drift_schedule",
    "first_relevant_rank",
    "generate_synthetic",
    "ipc_eval",
    "knn_classify",
    "knn_ipc_eval",
    "make_codes",
    "match_eval",
    "permutation_aucs",
    "retrieval_metrics",
    "run_backtest",
    "title_abstract_eval",
    "tune_threshold",
]
