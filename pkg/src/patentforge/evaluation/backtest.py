"""Backtest: do context-similarity scores anticipate later innovations?

Candidates are code pairs that never co-occurred before the cutoff and
meet a support floor in the training window.  Each candidate gets one CS
score from training-window embeddings; each test window labels its top-K
pairs by co-occurrence z-score as realized innovations.  AUC measures
how far the scores pull those positives up the ranking, with a
label-permutation band as the no-skill reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import Corpus, TimeWindow, window_slice
from ..errors import ConfigError, InsufficientCandidates, NoEmbeddings, SingleClass
from ..nullmodel import (
    candidate_pairs,
    k_for_imbalance,
    label_innovations,
    pair_stats_table,
)
from ..similarity import CSConfig, context_similarity
from .metrics import auc_roc


@dataclass(frozen=True)
class BacktestConfig:
    train_window: TimeWindow
    test_windows: tuple
    class_imbalance: float = 0.007
    min_support: int = 1
    cs: CSConfig = field(default_factory=CSConfig)
    n_permutations: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.test_windows:
            raise ConfigError("at least one test window required")
        for w in self.test_windows:
            if w.start_year <= self.train_window.end_year:
                raise ConfigError(
                    f"test window {w} overlaps training window {self.train_window}"
                )
        if self.min_support < 1:
            raise ConfigError(f"min_support must be >= 1, got {self.min_support}")
        if self.n_permutations < 0:
            raise ConfigError("n_permutations must be >= 0")


@dataclass(frozen=True)
class WindowResult:
    window: TimeWindow
    K: int
    z_threshold: float | None
    positives: frozenset
    auc: float
    degenerate: bool
    permutation_aucs: tuple

    @property
    def permutation_p95(self) -> float | None:
        if not self.permutation_aucs:
            return None
        return float(np.quantile(self.permutation_aucs, 0.95))


@dataclass(frozen=True)
class BacktestResult:
    config: BacktestConfig
    candidates: tuple            # scored pairs, sorted
    scores: tuple                # CS values aligned with candidates
    n_skipped: int               # candidates without embeddings on both sides
    windows: tuple

    def score_of(self, pair) -> float:
        return self.scores[self.candidates.index(pair)]


def permutation_aucs(scores, labels, n, rng) -> np.ndarray:
    """AUCs of the same scores against label shufflings, sorted."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = auc_roc(scores, labels[rng.permutation(labels.size)])
    out.sort()
    return out


def run_backtest(corpus: Corpus, store, cfg: BacktestConfig) -> BacktestResult:
    """Score never-co-occurred pairs and evaluate against each test window.

    ``store`` must hold embeddings extracted over the training window.
    Windows where labeling degenerates (too few rankable pairs, or one
    class only) report auc=0.5 with the flag set rather than failing.
    """
    cutoff = cfg.train_window.end_year + 1
    cands = candidate_pairs(
        corpus, cutoff, min_support=cfg.min_support, support_window=cfg.train_window
    )
    scored, values = [], []
    skipped = 0
    for pair in sorted(cands):
        try:
            v, _ = context_similarity(store, pair[0], pair[1], cfg.cs)
        except NoEmbeddings:
            skipped += 1
            continue
        scored.append(pair)
        values.append(v)
    if len(scored) < 2:
        raise InsufficientCandidates(f"only {len(scored)} scorable candidate pairs")
    values_arr = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)

    windows = []
    for w in cfg.test_windows:
        sub = window_slice(corpus, w)
        stats = pair_stats_table(sub, scored)
        K = k_for_imbalance(len(scored), cfg.class_imbalance)
        degenerate = False
        z_thr = None
        positives = frozenset()
        try:
            lab = label_innovations(scored, stats, K)
            positives = lab.positives
            z_thr = lab.z_threshold
        except InsufficientCandidates:
            degenerate = True
        labels = np.asarray([p in positives for p in scored], dtype=bool)
        perm = ()
        if degenerate or labels.all() or not labels.any():
            degenerate = True
            auc = 0.5
        else:
            try:
                auc = auc_roc(values_arr, labels)
            except SingleClass:
                degenerate = True
                auc = 0.5
        if not degenerate and cfg.n_permutations:
            perm = tuple(permutation_aucs(values_arr, labels, cfg.n_permutations, rng))
        windows.append(
            WindowResult(
                window=w,
                K=K,
                z_threshold=z_thr,
                positives=positives,
                auc=float(auc),
                degenerate=degenerate,
                permutation_aucs=perm,
            )
        )
    return BacktestResult(
        config=cfg,
        candidates=tuple(scored),
        scores=tuple(float(v) for v in values_arr),
        n_skipped=skipped,
        windows=tuple(windows),
    )
