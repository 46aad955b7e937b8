"""Downstream task evaluations: code assignment, citation retrieval,
title/abstract matching.

All three read the same trained encoder; none of them retrain anything.
Gold labels come from the corpus records, candidate vectors from an
embedding store extracted over the full corpus.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyCorpus, NoRelevant
from ..model.embeddings import encode_text_cls, predict_codes
from .metrics import classification_metrics, knn_classify, match_eval, retrieval_metrics

THRESHOLD_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)


def _gold_codes(records) -> dict:
    return {r.id: frozenset(r.sorted_codes()) for r in records}


def tune_threshold(params, config, tok, records, grid=THRESHOLD_GRID):
    """Pick the probability cutoff with the best validation micro F1.

    Predictions are computed once per record; each grid point just
    re-reads the cached distribution.  Ties go to the smaller cutoff.
    """
    if not records:
        raise EmptyCorpus("no validation records to tune on")
    preds = {r.id: predict_codes(params, config, tok, r.title, r.abstract)
             for r in records}
    gold = _gold_codes(records)
    best_t, best_f1 = None, -1.0
    for t in grid:
        cut = {}
        for rid, p in preds.items():
            keep = frozenset(c for c, pr in zip(p.codes, p.probs) if pr >= t)
            if not keep:
                keep = frozenset({p.chosen[0]})
            cut[rid] = keep
        f1 = classification_metrics(gold, cut)["micro_f1"]
        if f1 > best_f1:
            best_t, best_f1 = t, f1
    return best_t, best_f1


def ipc_eval(params, config, tok, val_records, test_records,
             grid=THRESHOLD_GRID) -> dict:
    """Masked-slot code assignment on held-out patents.

    Threshold is tuned on the validation slice, applied untouched to
    test.  Reports set metrics at the tuned cutoff, argmax accuracy, and
    ranked-retrieval scores of the full code ordering.
    """
    threshold, val_f1 = tune_threshold(params, config, tok, val_records, grid)
    gold = _gold_codes(test_records)
    pred, ranked, argmax_hit = {}, [], 0
    for r in test_records:
        p = predict_codes(params, config, tok, r.title, r.abstract, threshold=threshold)
        pred[r.id] = frozenset(p.chosen)
        order = np.argsort(-p.probs, kind="stable")
        ranked.append([p.codes[i] in gold[r.id] for i in order])
        if p.codes[order[0]] in gold[r.id]:
            argmax_hit += 1
    out = classification_metrics(gold, pred)
    out.update(retrieval_metrics(ranked))
    out["argmax_accuracy"] = argmax_hit / len(test_records)
    out["threshold"] = threshold
    out["val_micro_f1"] = val_f1
    return out


def knn_ipc_eval(store, train_records, test_records, k=5, threshold=0.5) -> dict:
    """Nearest-neighbor baseline on CLS vectors; no masked slot involved."""
    have = set(store.cls_ids.tolist())
    train_ids = [r.id for r in train_records if r.id in have]
    train_vecs = np.stack([store.cls_vector(r) for r in train_ids])
    labels = {r.id: frozenset(r.sorted_codes()) for r in train_records}
    train_labels = [labels[i] for i in train_ids]
    gold, pred = {}, {}
    for r in test_records:
        gold[r.id] = frozenset(r.sorted_codes())
        pred[r.id] = knn_classify(
            train_vecs, train_labels, store.cls_vector(r.id), k, threshold=threshold
        )
    out = classification_metrics(gold, pred)
    out["k"] = k
    return out


def citation_eval(store, query_records, n_distractors=20, seed=0) -> dict:
    """Rank each query's cited patents against sampled distractors.

    Candidate pool per query: its true citations (those present in the
    store) plus ``n_distractors`` non-citations drawn uniformly.  Scores
    are CLS cosines.  Queries with no retrievable citation are skipped;
    if all are, the task is undefined.
    """
    all_ids = store.cls_ids.tolist()
    id_set = set(all_ids)
    rng = np.random.default_rng(seed)
    ranked = []
    n_used = 0
    for r in sorted(query_records, key=lambda r: r.id):
        cited = sorted(set(r.citations) & id_set - {r.id})
        if not cited:
            continue
        others = [i for i in all_ids if i != r.id and i not in cited]
        n_draw = min(n_distractors, len(others))
        picks = rng.choice(len(others), size=n_draw, replace=False)
        pool = cited + [others[int(j)] for j in sorted(picks)]
        q = store.cls_vector(r.id).astype(np.float64)
        q /= np.linalg.norm(q)
        vecs = np.stack([store.cls_vector(i) for i in pool]).astype(np.float64)
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        sims = vecs @ q
        # stable ranking: ties resolve by pool position
        order = np.lexsort((np.arange(len(pool)), -sims))
        cited_set = set(cited)
        ranked.append([pool[i] in cited_set for i in order])
        n_used += 1
    if not ranked:
        raise NoRelevant("no query has a citation inside the store")
    out = retrieval_metrics(ranked)
    out["n_queries"] = n_used
    return out


def title_abstract_eval(params, config, tok, records) -> dict:
    """Match titles to their own abstracts in embedding space.

    Each side is encoded alone; every abstract ranks every title.  The
    AUC pools all pairs, matched vs not.
    """
    if not records:
        raise EmptyCorpus("no records to match")
    recs = sorted(records, key=lambda r: r.id)
    titles = np.stack(
        [encode_text_cls(params, config, tok, title=r.title) for r in recs]
    )
    abstracts = np.stack(
        [encode_text_cls(params, config, tok, abstract=r.abstract) for r in recs]
    )
    out = match_eval(abstracts, titles)
    out["n_pairs"] = len(recs)
    return out
