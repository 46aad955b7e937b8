"""Ranking, classification, and retrieval metrics, all closed form.

AUC is computed from average ranks (Mann-Whitney), which equals the
probability a random positive outscores a random negative with ties
counting half.  Macro F1 averages over the codes that actually occur in
the gold labels; codes nobody holds contribute nothing.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import CountMismatch, KeyMismatch, NoRelevant, SingleClass


def average_ranks(x) -> np.ndarray:
    """1-based ranks, ties sharing the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ends = np.r_[starts[1:], len(sx)]
    ranks = np.empty(len(x), dtype=np.float64)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def auc_roc(scores, labels) -> float:
    """Area under the ROC curve; ties contribute one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise CountMismatch(f"scores {scores.shape} vs labels {labels.shape}")
    pos = labels.astype(bool)
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"{n_pos} positives, {n_neg} negatives")
    r = average_ranks(scores)
    return float((r[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# Multi-label classification
# ---------------------------------------------------------------------------


def _f1(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def classification_metrics(gold: dict, pred: dict, universe=None) -> dict:
    """Multi-label scores for code assignment.

    gold and pred map patent id to a set of codes over the same keys.
    Returns micro_f1, macro_f1 (over gold-present codes), and hamming
    loss over the id x universe grid.
    """
    if set(gold) != set(pred):
        raise KeyMismatch(
            f"{len(set(gold) ^ set(pred))} ids differ between gold and predictions"
        )
    if not gold:
        raise KeyMismatch("no patents to score")
    if universe is None:
        universe = set()
        for s in gold.values():
            universe |= set(s)
        for s in pred.values():
            universe |= set(s)
    universe = sorted(universe)
    tp_c = {c: 0 for c in universe}
    fp_c = {c: 0 for c in universe}
    fn_c = {c: 0 for c in universe}
    wrong_cells = 0
    for pid in gold:
        g = set(gold[pid]) & set(universe)
        p = set(pred[pid]) & set(universe)
        wrong_cells += len(g ^ p)
        for c in g & p:
            tp_c[c] += 1
        for c in p - g:
            fp_c[c] += 1
        for c in g - p:
            fn_c[c] += 1
    tp = sum(tp_c.values())
    fp = sum(fp_c.values())
    fn = sum(fn_c.values())
    present = [c for c in universe if tp_c[c] + fn_c[c] > 0]
    if not present:
        raise KeyMismatch("gold labels are empty for every patent")
    macro = sum(_f1(tp_c[c], fp_c[c], fn_c[c]) for c in present) / len(present)
    return {
        "micro_f1": _f1(tp, fp, fn),
        "macro_f1": macro,
        "hamming_loss": wrong_cells / (len(gold) * len(universe)),
    }


def knn_classify(train_vecs, train_labels, query_vec, k, threshold=0.5):
    """Codes held by at least ceil(threshold * k) of the k nearest
    training vectors under cosine; neighbor ties break on index."""
    train_vecs = np.asarray(train_vecs, dtype=np.float64)
    q = np.asarray(query_vec, dtype=np.float64)
    if train_vecs.ndim != 2 or train_vecs.shape[1] != q.shape[0]:
        raise CountMismatch(f"train {train_vecs.shape} vs query {q.shape}")
    if len(train_labels) != train_vecs.shape[0]:
        raise CountMismatch("one label set per training vector required")
    if not (1 <= k <= train_vecs.shape[0]):
        raise CountMismatch(f"k={k} with {train_vecs.shape[0]} training vectors")
    norms = np.linalg.norm(train_vecs, axis=1) * np.linalg.norm(q)
    sims = np.where(norms > 0, train_vecs @ q / np.where(norms > 0, norms, 1.0), -1.0)
    order = np.lexsort((np.arange(len(sims)), -sims))
    votes = {}
    for i in order[:k]:
        for c in train_labels[i]:
            votes[c] = votes.get(c, 0) + 1
    need = max(1, math.ceil(threshold * k))
    return frozenset(c for c, n in votes.items() if n >= need)


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------


def average_precision(ranked_relevance) -> float:
    """AP of one ranked list of 0/1 relevance flags."""
    hits = 0
    total = 0.0
    for i, rel in enumerate(ranked_relevance, start=1):
        if rel:
            hits += 1
            total += hits / i
    if hits == 0:
        raise NoRelevant("ranked list has no relevant item")
    return total / hits


def first_relevant_rank(ranked_relevance) -> int:
    for i, rel in enumerate(ranked_relevance, start=1):
        if rel:
            return i
    raise NoRelevant("ranked list has no relevant item")


def retrieval_metrics(ranked_lists, mrr_cutoff=10) -> dict:
    """MAP, MRR at a cutoff (0 beyond it), and mean first-relevant rank
    over a collection of ranked 0/1 relevance lists."""
    if not ranked_lists:
        raise NoRelevant("no queries")
    aps, rrs, frs = [], [], []
    for lst in ranked_lists:
        aps.append(average_precision(lst))
        r = first_relevant_rank(lst)
        frs.append(r)
        rrs.append(1.0 / r if r <= mrr_cutoff else 0.0)
    return {
        "map": float(np.mean(aps)),
        f"mrr_at_{mrr_cutoff}": float(np.mean(rrs)),
        "rfr": float(np.mean(frs)),
    }


def match_eval(query_vecs, target_vecs) -> dict:
    """How well row i of queries retrieves row i of targets by cosine.

    AUC pools all query-target scores with the diagonal as positives;
    MRR is the mean reciprocal rank of the true target per query.
    """
    Q = np.asarray(query_vecs, dtype=np.float64)
    T = np.asarray(target_vecs, dtype=np.float64)
    if Q.shape != T.shape or Q.ndim != 2:
        raise CountMismatch(f"queries {Q.shape} vs targets {T.shape}")
    n = Q.shape[0]
    if n < 2:
        raise CountMismatch("need at least two pairs to rank against")
    qn = np.linalg.norm(Q, axis=1, keepdims=True)
    tn = np.linalg.norm(T, axis=1, keepdims=True)
    if (qn == 0).any() or (tn == 0).any():
        raise CountMismatch("zero-norm embedding row")
    sims = (Q / qn) @ (T / tn).T
    labels = np.eye(n, dtype=bool).ravel()
    auc = auc_roc(sims.ravel(), labels)
    rr = []
    for i in range(n):
        # rank of the true target among all targets for query i
        r = average_ranks(-sims[i])[i]
        rr.append(1.0 / r)
    return {"auc": auc, "mrr": float(np.mean(rr))}
