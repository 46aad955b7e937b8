"""Bipartite patent-technology co-occurrence statistics.

The null model assigns each (patent, code) link an independent probability
proportional to the product of the patent's degree and the code's degree
over the total link count.  Expected co-occurrences, their standard
deviation, and z-scores follow from summing the per-patent link-pair
probabilities; the exact co-occurrence distribution is Poisson binomial.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, TechCode, TimeWindow, code_support, window_slice
from .errors import (
    DegenerateSigma,
    EmptyCorpus,
    InsufficientCandidates,
    UnknownCode,
)

Pair = tuple


def canonical_pair(a: TechCode, b: TechCode) -> Pair:
    """Unordered distinct pair in lexicographic order."""
    if a == b:
        raise ValueError(f"pair codes must be distinct, got {a!r} twice")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class BipartiteDegrees:
    """Patent degrees, code degrees, and the total link count N."""

    w_p: dict
    w_c: dict
    N: int


@dataclass(frozen=True)
class PairStats:
    """Observed count and null-model moments for one code pair.

    ``z`` is None when ``sigma`` is zero (undefined statistic; such pairs
    are excluded from rankings).
    """

    pair: Pair
    O: int
    E: float
    sigma: float
    z: float | None

    def __post_init__(self):
        if self.O < 0:
            raise ValueError("O must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class InnovationLabels:
    """Top-K positives by z-score within a candidate universe."""

    positives: frozenset
    K: int
    z_threshold: float
    universe_size: int

    @property
    def class_imbalance(self) -> float:
        return self.K / self.universe_size


def degrees(corpus: Corpus) -> BipartiteDegrees:
    """Bipartite degree sequences of the patent-code membership network."""
    if len(corpus) == 0:
        raise EmptyCorpus("degrees of an empty corpus")
    w_p = {rec.id: len(rec.codes) for rec in corpus}
    w_c = {code: len(ids) for code, ids in sorted(corpus.by_code.items())}
    N = sum(w_p.values())
    return BipartiteDegrees(w_p=w_p, w_c=w_c, N=N)


def cooccurrence_counts(corpus: Corpus) -> dict:
    """Map from each unordered code pair to the number of patents holding both."""
    counts = {}
    for rec in corpus:
        for a, b in itertools.combinations(rec.sorted_codes(), 2):
            key = (a, b)
            counts[key] = counts.get(key, 0) + 1
    return counts


def candidate_pairs(
    corpus: Corpus,
    cutoff_year: int,
    min_support: int = 1,
    support_window: TimeWindow | None = None,
) -> set:
    """Pairs that never co-occurred in any patent published before the cutoff.

    Both codes must appear in at least ``min_support`` patents of
    ``support_window`` (default: all years before the cutoff).  Candidates
    are the not-yet-realized combinations eligible for forecasting.
    """
    pre = [r for r in corpus if r.pub_year < cutoff_year]
    if support_window is None:
        support_corpus = Corpus.from_records(pre) if pre else None
    else:
        support_corpus = window_slice(corpus, support_window)
    if support_corpus is None or len(support_corpus) == 0:
        return set()
    eligible = sorted(
        c
        for c in support_corpus.codes()
        if code_support(support_corpus, c) >= min_support
    )
    seen = set()
    for rec in pre:
        for a, b in itertools.combinations(rec.sorted_codes(), 2):
            seen.add((a, b))
    return {
        (a, b)
        for a, b in itertools.combinations(eligible, 2)
        if (a, b) not in seen
    }


class LinkProbabilities:
    """Clamped link-probability matrix for one corpus window.

    ``P[i, j] = min(1, w_p(i) * w_c(j) / N)`` over the window's patents
    (rows, in record order) and sorted codes (columns).
    """

    def __init__(self, corpus: Corpus):
        if len(corpus) == 0:
            raise EmptyCorpus("link probabilities of an empty corpus")
        self.codes = corpus.codes()
        self.code_index = {c: j for j, c in enumerate(self.codes)}
        w_p = np.array([len(r.codes) for r in corpus], dtype=np.float64)
        w_c = np.array(
            [len(corpus.by_code[c]) for c in self.codes], dtype=np.float64
        )
        N = float(w_p.sum())
        self.P = np.minimum(1.0, np.outer(w_p, w_c) / N)
        self.n_clamped = int(np.count_nonzero(np.outer(w_p, w_c) > N))

    def column(self, code: TechCode) -> np.ndarray:
        j = self.code_index.get(code)
        if j is None:
            raise UnknownCode(f"code {code!r} not in window")
        return self.P[:, j]

    def pair_q(self, pair: Pair) -> np.ndarray:
        """Per-patent probability that both links of the pair are present."""
        return self.column(pair[0]) * self.column(pair[1])


def _observed(corpus: Corpus, pair: Pair) -> int:
    a_ids = set(corpus.by_code.get(pair[0], ()))
    b_ids = corpus.by_code.get(pair[1], ())
    return sum(1 for pid in b_ids if pid in a_ids)


def chung_lu_stats(
    corpus_window: Corpus,
    pair: Pair,
    probs: LinkProbabilities | None = None,
) -> PairStats:
    """Observed count, expectation, standard deviation, and z for one pair.

    Raises :class:`UnknownCode` when a code is absent from the window and
    :class:`DegenerateSigma` when the standard deviation vanishes.  Pass a
    precomputed :class:`LinkProbabilities` to amortize across many pairs.
    """
    pair = canonical_pair(*pair)
    if probs is None:
        probs = LinkProbabilities(corpus_window)
    q = probs.pair_q(pair)
    E = float(q.sum())
    sigma = float(math.sqrt(float((q * (1.0 - q)).sum())))
    O = _observed(corpus_window, pair)
    if sigma == 0.0:
        raise DegenerateSigma(f"sigma = 0 for pair {pair}")
    z = (O - E) / sigma
    return PairStats(pair=pair, O=O, E=E, sigma=sigma, z=z)


def pair_stats_table(
    corpus_window: Corpus, pairs, probs: LinkProbabilities | None = None
) -> dict:
    """Vectorized ``chung_lu_stats`` over many pairs.

    Unlike the single-pair form, degenerate pairs are kept with ``z=None``
    and pairs with a code missing from the window are skipped; callers
    ranking candidates treat both as unrankable.
    """
    if probs is None:
        probs = LinkProbabilities(corpus_window)
    pairs = [canonical_pair(*p) for p in pairs]
    out = {}
    cooc = cooccurrence_counts(corpus_window)
    idx = probs.code_index
    known = [p for p in pairs if p[0] in idx and p[1] in idx]
    if known:
        ja = np.array([idx[p[0]] for p in known])
        jb = np.array([idx[p[1]] for p in known])
        Q = probs.P[:, ja] * probs.P[:, jb]
        E = Q.sum(axis=0)
        var = (Q * (1.0 - Q)).sum(axis=0)
        sigma = np.sqrt(var)
        for i, p in enumerate(known):
            O = cooc.get(p, 0)
            s = float(sigma[i])
            z = (O - float(E[i])) / s if s > 0.0 else None
            out[p] = PairStats(pair=p, O=O, E=float(E[i]), sigma=s, z=z)
    return out


def monte_carlo_null(
    corpus_window: Corpus,
    pair: Pair,
    samples: int,
    seed: int,
    probs: LinkProbabilities | None = None,
    chunk: int = 20000,
) -> tuple:
    """Empirical (mean, std) of the pair's co-occurrence count under the null.

    Draws independent link indicators per (patent, code) with the clamped
    null probabilities and counts patents holding both links.  Serves as
    the sampling oracle for the closed-form expectation and deviation.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pair = canonical_pair(*pair)
    if probs is None:
        probs = LinkProbabilities(corpus_window)
    pa = probs.column(pair[0])
    pb = probs.column(pair[1])
    rng = np.random.default_rng(seed)
    counts = np.empty(samples, dtype=np.int64)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        hits_a = rng.random((m, pa.size)) < pa
        hits_b = rng.random((m, pb.size)) < pb
        counts[done : done + m] = np.count_nonzero(hits_a & hits_b, axis=1)
        done += m
    return float(counts.mean()), float(counts.std())


def poisson_binomial_tail(q: np.ndarray, observed: int) -> float:
    """P[X >= observed] for X a sum of independent Bernoulli(q_i).

    Exact dynamic programming over the success-probability vector; the
    distribution vector is renormalized periodically so long corpora do
    not accumulate floating-point drift.
    """
    if observed < 0:
        raise ValueError("observed must be >= 0")
    n = q.size
    if observed == 0:
        return 1.0
    if observed > n:
        return 0.0
    dp = np.zeros(n + 1, dtype=np.float64)
    dp[0] = 1.0
    log_scale = 0.0
    for i, qi in enumerate(q):
        dp[1:] = dp[1:] * (1.0 - qi) + dp[:-1] * qi
        dp[0] *= 1.0 - qi
        if (i + 1) % 256 == 0:
            s = dp.sum()
            if s > 0.0:
                dp /= s
                log_scale += math.log(s)
    tail = float(dp[observed:].sum())
    return float(tail * math.exp(log_scale))


def poisson_binomial_pvalue(
    corpus_window: Corpus,
    pair: Pair,
    observed: int,
    probs: LinkProbabilities | None = None,
) -> float:
    """Exact null probability of observing at least ``observed`` co-occurrences."""
    pair = canonical_pair(*pair)
    if probs is None:
        probs = LinkProbabilities(corpus_window)
    return poisson_binomial_tail(probs.pair_q(pair), observed)


def poisson_binomial_pvalues_batch(Q: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Tail p-values for many pairs at once; Q has one row of q_i per pair."""
    n_pairs, n = Q.shape
    dp = np.zeros((n_pairs, n + 1), dtype=np.float64)
    dp[:, 0] = 1.0
    for i in range(n):
        qi = Q[:, i : i + 1]
        dp[:, 1:] = dp[:, 1:] * (1.0 - qi) + dp[:, :-1] * qi
        dp[:, 0] *= (1.0 - qi).ravel()
    out = np.empty(n_pairs, dtype=np.float64)
    for k in range(n_pairs):
        out[k] = dp[k, observed[k] :].sum()
    return np.clip(out, 0.0, 1.0)


def k_for_imbalance(universe_size: int, ci: float) -> int:
    """Positive count for a target class-imbalance fraction, at least 1.

    Rounds half-up so the realized imbalance tracks the requested one.
    """
    if not 0.0 < ci < 1.0:
        raise ValueError(f"class imbalance must be in (0, 1), got {ci}")
    if universe_size <= 0:
        raise ValueError("universe_size must be positive")
    return max(1, int(math.floor(ci * universe_size + 0.5)))


def label_innovations(candidates, stats: dict, K: int) -> InnovationLabels:
    """Assign label 1 to the K candidates with the highest z-scores.

    Ties at the boundary resolve by higher observed count, then by
    lexicographic pair order, so labeling is deterministic across runs.
    """
    universe = sorted(canonical_pair(*p) for p in candidates)
    rankable = []
    for p in universe:
        st = stats.get(p)
        if st is not None and st.z is not None:
            rankable.append(st)
    if K > len(rankable):
        raise InsufficientCandidates(
            f"K={K} exceeds {len(rankable)} rankable candidates"
        )
    if K < 1:
        raise ValueError("K must be >= 1")
    rankable.sort(key=lambda st: (-st.z, -st.O, st.pair))
    top = rankable[:K]
    return InnovationLabels(
        positives=frozenset(st.pair for st in top),
        K=K,
        z_threshold=top[-1].z,
        universe_size=len(universe),
    )
