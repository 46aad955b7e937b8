"""Ranking, classification, and retrieval metrics against hand oracles."""

import json
import pathlib

import numpy as np
import pytest

from patentforge import (
    CountMismatch,
    KeyMismatch,
    NoRelevant,
    SingleClass,
    auc_roc,
    classification_metrics,
    knn_classify,
    match_eval,
    retrieval_metrics,
)
from patentforge.evaluation.metrics import (
    average_precision,
    average_ranks,
    first_relevant_rank,
)

FIXTURES = json.loads(
    (pathlib.Path(__file__).parent / "fixtures" / "metric_cases.json").read_text()
)


def auc_by_pair_counting(scores, labels):
    """Brute-force oracle: mean over pos/neg pairs of win=1, tie=1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pos = scores[labels]
    neg = scores[~labels]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------------------
# auc_roc
# ---------------------------------------------------------------------------


def test_average_ranks_ties_share_mean():
    got = average_ranks([10.0, 20.0, 20.0, 30.0])
    np.testing.assert_allclose(got, [1.0, 2.5, 2.5, 4.0])


def test_auc_perfectly_separated():
    assert auc_roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc_roc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auc_all_tied_scores():
    assert auc_roc([3.0, 3.0, 3.0, 3.0], [1, 0, 1, 0]) == 0.5


def test_auc_fixture_cases():
    for case in FIXTURES["auc_cases"]:
        got = auc_roc(case["scores"], case["labels"])
        assert got == pytest.approx(case["expected"], rel=1e-12), case["name"]


def test_auc_matches_pair_counting_with_ties():
    # quantized scores force plenty of ties
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(4, 120))
        scores = rng.integers(0, 6, size=n) / 4.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        got = auc_roc(scores, labels)
        want = auc_by_pair_counting(scores, labels)
        assert got == pytest.approx(want, abs=1e-12)


def test_auc_complement_identity_without_ties():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(4, 60))
        scores = rng.permutation(n).astype(np.float64)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        total = auc_roc(scores, labels) + auc_roc(-scores, labels)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_auc_single_class_rejected():
    with pytest.raises(SingleClass):
        auc_roc([0.1, 0.2, 0.3], [1, 1, 1])
    with pytest.raises(SingleClass):
        auc_roc([0.1, 0.2, 0.3], [0, 0, 0])


def test_auc_shape_mismatch_rejected():
    with pytest.raises(CountMismatch):
        auc_roc([0.1, 0.2], [1, 0, 1])


# ---------------------------------------------------------------------------
# classification_metrics
# ---------------------------------------------------------------------------


def as_sets(d):
    return {k: frozenset(v) for k, v in d.items()}


def test_classification_fixture_cases():
    for case in FIXTURES["classification_cases"]:
        got = classification_metrics(
            as_sets(case["gold"]), as_sets(case["pred"]), universe=case["universe"]
        )
        for key in ("micro_f1", "macro_f1", "hamming_loss"):
            assert got[key] == pytest.approx(case[key], abs=1e-12), (
                case["name"],
                key,
            )


def test_classification_default_universe_is_observed_codes():
    gold = {"P1": {"A"}, "P2": {"B"}}
    pred = {"P1": {"A"}, "P2": {"A"}}
    got = classification_metrics(gold, pred)
    # same cells as the explicit {A, B} universe
    assert got["hamming_loss"] == pytest.approx(0.5)
    assert got["micro_f1"] == pytest.approx(0.5)


def test_classification_key_mismatch():
    with pytest.raises(KeyMismatch):
        classification_metrics({"P1": {"A"}}, {"P2": {"A"}})
    with pytest.raises(KeyMismatch):
        classification_metrics({"P1": {"A"}, "P2": {"B"}}, {"P1": {"A"}})
    with pytest.raises(KeyMismatch):
        classification_metrics({}, {})


def test_classification_empty_gold_everywhere_rejected():
    with pytest.raises(KeyMismatch):
        classification_metrics({"P1": set()}, {"P1": {"A"}}, universe=["A"])


def test_classification_metrics_randomized_ranges():
    rng = np.random.default_rng(5)
    universe = ["A", "B", "C", "D", "E"]
    for _ in range(20):
        n = int(rng.integers(2, 12))
        gold, pred = {}, {}
        for i in range(n):
            gold[f"P{i}"] = frozenset(
                universe[j] for j in rng.choice(5, size=int(rng.integers(1, 4)), replace=False)
            )
            pred[f"P{i}"] = frozenset(
                universe[j]
                for j in rng.choice(5, size=int(rng.integers(0, 4)), replace=False)
            )
        m = classification_metrics(gold, pred, universe=universe)
        assert 0.0 <= m["micro_f1"] <= 1.0
        assert 0.0 <= m["macro_f1"] <= 1.0
        assert 0.0 <= m["hamming_loss"] <= 1.0


# ---------------------------------------------------------------------------
# knn_classify
# ---------------------------------------------------------------------------


def test_knn_k1_returns_nearest_codes():
    train = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    labels = [frozenset({"A01B1"}), frozenset({"B02C2", "C03D3"}), frozenset({"D04E4"})]
    got = knn_classify(train, labels, np.array([0.1, 0.99]), k=1)
    assert got == frozenset({"B02C2", "C03D3"})


def test_knn_exact_hit_ranks_first():
    train = np.array([[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]])
    labels = [frozenset({"A"}), frozenset({"B"}), frozenset({"C"})]
    got = knn_classify(train, labels, np.array([0.6, 0.8]), k=1)
    assert got == frozenset({"B"})


def test_knn_tied_neighbors_break_on_index():
    train = np.array([[1.0, 0.0], [1.0, 0.0]])
    labels = [frozenset({"FIRST"}), frozenset({"SECOND"})]
    got = knn_classify(train, labels, np.array([1.0, 0.0]), k=1)
    assert got == frozenset({"FIRST"})


def test_knn_threshold_zero_is_union():
    train = np.array([[1.0, 0.0], [0.9, 0.1], [0.8, 0.2]])
    labels = [frozenset({"A"}), frozenset({"B"}), frozenset({"C"})]
    got = knn_classify(train, labels, np.array([1.0, 0.0]), k=3, threshold=0.0)
    assert got == frozenset({"A", "B", "C"})


def test_knn_threshold_one_requires_unanimity():
    train = np.array([[1.0, 0.0], [0.9, 0.1], [0.8, 0.2]])
    labels = [
        frozenset({"A", "X"}),
        frozenset({"A", "Y"}),
        frozenset({"A"}),
    ]
    got = knn_classify(train, labels, np.array([1.0, 0.0]), k=3, threshold=1.0)
    assert got == frozenset({"A"})


def test_knn_majority_vote_counts():
    # three nearest carry A twice and B once; need ceil(0.5 * 3) = 2 votes
    train = np.array([[1.0, 0.0], [0.95, 0.05], [0.9, 0.1], [-1.0, 0.0]])
    labels = [
        frozenset({"A"}),
        frozenset({"A", "B"}),
        frozenset({"C"}),
        frozenset({"Z"}),
    ]
    got = knn_classify(train, labels, np.array([1.0, 0.0]), k=3, threshold=0.5)
    assert got == frozenset({"A"})


def test_knn_argument_errors():
    train = np.array([[1.0, 0.0], [0.0, 1.0]])
    labels = [frozenset({"A"}), frozenset({"B"})]
    with pytest.raises(CountMismatch):
        knn_classify(train, labels, np.array([1.0, 0.0]), k=0)
    with pytest.raises(CountMismatch):
        knn_classify(train, labels, np.array([1.0, 0.0]), k=3)
    with pytest.raises(CountMismatch):
        knn_classify(train, labels, np.array([1.0, 0.0, 0.0]), k=1)
    with pytest.raises(CountMismatch):
        knn_classify(train, [frozenset({"A"})], np.array([1.0, 0.0]), k=1)


# ---------------------------------------------------------------------------
# retrieval metrics
# ---------------------------------------------------------------------------


def test_average_precision_two_hits():
    assert average_precision([1, 0, 1]) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)


def test_average_precision_no_hit_rejected():
    with pytest.raises(NoRelevant):
        average_precision([0, 0, 0])
    with pytest.raises(NoRelevant):
        first_relevant_rank([0, 0])


def test_retrieval_fixture_cases():
    for case in FIXTURES["retrieval_cases"]:
        got = retrieval_metrics(case["ranked"])
        for key in ("map", "mrr_at_10", "rfr"):
            assert got[key] == pytest.approx(case[key], abs=1e-12), (case["name"], key)


def test_retrieval_custom_cutoff():
    got = retrieval_metrics([[0, 0, 1]], mrr_cutoff=2)
    assert got["mrr_at_2"] == 0.0
    assert got["rfr"] == 3.0
    got = retrieval_metrics([[0, 0, 1]], mrr_cutoff=3)
    assert got["mrr_at_3"] == pytest.approx(1.0 / 3.0)


def test_retrieval_no_queries_rejected():
    with pytest.raises(NoRelevant):
        retrieval_metrics([])


# ---------------------------------------------------------------------------
# match_eval
# ---------------------------------------------------------------------------


def test_match_eval_identical_rows():
    rng = np.random.default_rng(0)
    V = rng.standard_normal((6, 8))
    got = match_eval(V, V)
    assert got["auc"] == 1.0
    assert got["mrr"] == 1.0


def test_match_eval_two_pair_hand_case():
    # queries are orthonormal axes; targets built so the cosine matrix is
    # exactly [[0.9, 0.2], [0.1, 0.8]]
    Q = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    T = np.array(
        [
            [0.9, 0.1, np.sqrt(1.0 - 0.81 - 0.01), 0.0],
            [0.2, 0.8, 0.0, np.sqrt(1.0 - 0.04 - 0.64)],
        ]
    )
    got = match_eval(Q, T)
    assert got["auc"] == 1.0
    assert got["mrr"] == 1.0


def test_match_eval_swapped_targets():
    # diagonal cosines are the low ones: every score ordering is inverted
    Q = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    T = np.array(
        [
            [0.1, 0.9, np.sqrt(1.0 - 0.01 - 0.81), 0.0],
            [0.8, 0.2, 0.0, np.sqrt(1.0 - 0.64 - 0.04)],
        ]
    )
    got = match_eval(Q, T)
    assert got["auc"] == 0.0
    assert got["mrr"] == pytest.approx(0.5)


def test_match_eval_errors():
    V = np.eye(3)
    with pytest.raises(CountMismatch):
        match_eval(V, np.eye(4))
    with pytest.raises(CountMismatch):
        match_eval(V[:1], V[:1])
    bad = V.copy()
    bad[1] = 0.0
    with pytest.raises(CountMismatch):
        match_eval(V, bad)
