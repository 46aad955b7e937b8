"""Context similarity between technology codes from stored embeddings.

Three estimators: cosine of mean code embeddings, cosine of mean CLS
embeddings over the carrying patents, and the mean cosine over the top
x% most similar cross pairs of individual embeddings.  The top-x path
never materializes the full cross-similarity matrix; it streams row
blocks through a running top-m buffer, so memory stays far below
|A| x |B| while the result matches a full sort to float64 rounding
(bit-identical when one block covers the matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimMismatch,
    InsufficientCodes,
    NoEmbeddings,
    SelfPair,
    ZeroVector,
)
from .nullmodel import canonical_pair

CS_METHODS = ("mean_tech", "topx_tech", "mean_cls")


def cosine(a, b) -> float:
    """Cosine similarity in float64, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatch(f"shapes {a.shape} and {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vector")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class CSConfig:
    method: str = "topx_tech"
    x_percent: float = 0.01
    window_smoothing: int = 3

    def __post_init__(self):
        if self.method not in CS_METHODS:
            raise ConfigError(f"method must be one of {CS_METHODS}, got {self.method!r}")
        if not (0.0 < self.x_percent <= 1.0):
            raise ConfigError(f"x_percent must be in (0, 1], got {self.x_percent}")
        if self.window_smoothing < 1 or self.window_smoothing % 2 == 0:
            raise ConfigError(
                f"window_smoothing must be odd and positive, got {self.window_smoothing}"
            )


def code_mean_embedding(store, code, years=None, source="tech"):
    """Unnormalized mean embedding of a code (tech rows or carrier CLS)."""
    if source == "tech":
        vecs = store.vectors_for(code, years)
    elif source == "cls":
        vecs = store.cls_vectors_for(code, years)
    else:
        raise ConfigError(f"source must be 'tech' or 'cls', got {source!r}")
    return vecs.astype(np.float64).mean(axis=0)


def _unit_rows(mat, code):
    m = mat.astype(np.float64)
    norms = np.sqrt((m * m).sum(axis=1))
    if (norms == 0.0).any():
        raise ZeroVector(f"zero-norm embedding under code {code}")
    return m / norms[:, None]


def top_m_count(na: int, nb: int, x_percent: float) -> int:
    """Number of cross pairs kept: ceil of x% of |A|x|B|, at least 1."""
    return max(1, math.ceil(x_percent * na * nb))


def cs_topx(store, code_a, code_b, x_percent=0.01, years=None, block_elems=1 << 16):
    """Mean cosine over the top x% most similar cross pairs.

    Streams blocks of the similarity matrix through a top-m buffer of
    size <= m + block_elems, so peak extra memory is o(|A| x |B|) for
    fixed block size.  Returns (value, m).
    """
    if code_a == code_b:
        raise SelfPair(f"cs of {code_a} with itself")
    A = _unit_rows(store.vectors_for(code_a, years), code_a)
    B = _unit_rows(store.vectors_for(code_b, years), code_b)
    na, nb = A.shape[0], B.shape[0]
    m = top_m_count(na, nb, x_percent)
    rows_per_block = max(1, block_elems // nb)
    best = np.empty(0, dtype=np.float64)
    for i in range(0, na, rows_per_block):
        sims = (A[i : i + rows_per_block] @ B.T).ravel()
        cand = np.concatenate([best, sims])
        if cand.size > m:
            cand = np.partition(cand, cand.size - m)[cand.size - m :]
        best = cand
    top = np.sort(np.clip(best, -1.0, 1.0))[::-1]
    return float(top.sum() / m), m


def cs_mean(store, code_a, code_b, years=None, source="tech"):
    """Cosine of the two mean embeddings.  Returns (value, |A| x |B|)."""
    if code_a == code_b:
        raise SelfPair(f"cs of {code_a} with itself")
    ma = code_mean_embedding(store, code_a, years, source)
    mb = code_mean_embedding(store, code_b, years, source)
    na = store.rows_for(code_a, years).size
    nb = store.rows_for(code_b, years).size
    return cosine(ma, mb), na * nb


def context_similarity(store, code_a, code_b, cfg: CSConfig, years=None):
    """Dispatch on cfg.method.  Returns (value, n_pairs_used)."""
    if cfg.method == "topx_tech":
        return cs_topx(store, code_a, code_b, cfg.x_percent, years)
    if cfg.method == "mean_tech":
        return cs_mean(store, code_a, code_b, years, source="tech")
    return cs_mean(store, code_a, code_b, years, source="cls")


# ---------------------------------------------------------------------------
# Baseline band from random pairs
# ---------------------------------------------------------------------------


def random_pair_baseline(
    store, cfg: CSConfig, n_samples=200, seed=0, years=None, exclude=()
):
    """Mean and std of CS over random distinct code pairs.

    Pairs are drawn without replacement from all unordered pairs of
    codes with embeddings in the selected years, minus ``exclude``;
    n_samples is clamped to the population size.
    """
    codes = []
    for c in store.codes():
        if store.rows_for(c, years).size > 0:
            codes.append(c)
    if len(codes) < 2:
        raise InsufficientCodes(f"{len(codes)} codes with embeddings, need 2")
    banned = {canonical_pair(*p) for p in exclude}
    pool = []
    for i, a in enumerate(codes):
        for b in codes[i + 1 :]:
            if (a, b) not in banned:
                pool.append((a, b))
    if not pool:
        raise InsufficientCodes("every pair is excluded")
    rng = np.random.default_rng(seed)
    take = min(n_samples, len(pool))
    idx = rng.choice(len(pool), size=take, replace=False)
    vals = np.empty(take, dtype=np.float64)
    for j, k in enumerate(idx):
        a, b = pool[k]
        vals[j], _ = context_similarity(store, a, b, cfg, years)
    return float(vals.mean()), float(vals.std())


# ---------------------------------------------------------------------------
# Yearly series with gap-aware smoothing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CSSeries:
    """Per-year CS for one code pair; None marks a year with no data."""

    code_a: str
    code_b: str
    method: str
    years: tuple
    raw: tuple
    smoothed: tuple
    n_pairs_used: tuple

    def value_at(self, year, smoothed=True):
        i = self.years.index(year)
        return self.smoothed[i] if smoothed else self.raw[i]


def smooth_series(values, window: int):
    """Centered moving average that skips gaps (None values)."""
    half = window // 2
    out = []
    for i in range(len(values)):
        seen = [v for v in values[max(0, i - half) : i + half + 1] if v is not None]
        out.append(sum(seen) / len(seen) if seen else None)
    return out


def cs_timeseries(store, code_a, code_b, cfg: CSConfig, years) -> CSSeries:
    """CS per year over ``years``; a side with no embeddings that year
    leaves a gap rather than an exception."""
    code_a, code_b = canonical_pair(code_a, code_b)
    raw, used = [], []
    for y in years:
        try:
            v, n = context_similarity(store, code_a, code_b, cfg, years=(y,))
        except NoEmbeddings:
            v, n = None, 0
        raw.append(v)
        used.append(n)
    return CSSeries(
        code_a=code_a,
        code_b=code_b,
        method=cfg.method,
        years=tuple(years),
        raw=tuple(raw),
        smoothed=tuple(smooth_series(raw, cfg.window_smoothing)),
        n_pairs_used=tuple(used),
    )
