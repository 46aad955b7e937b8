"""Synthetic corpora with planted converging technology pairs.

Each code owns a disjoint word cluster.  A planted pair shares a bridge
vocabulary that both codes' texts drift toward along a nondecreasing
schedule, so their contexts converge years before the pair first
co-occurs on a patent.  Established pairs co-occur from the start and
are the only multi-code combinations outside the planted ones, which
keeps the rest of the pair universe clean of co-occurrences for
backtesting.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from datetime import date

import numpy as np

from ..corpus import Corpus, PatentRecord, TimeWindow
from ..errors import InfeasibleSpec
from ..nullmodel import canonical_pair

_SECTIONS = "ABCDEFGH"


def make_codes(n: int) -> list:
    """n distinct well-formed group-level codes."""
    return [f"{_SECTIONS[i % 8]}{i // 8 + 1:02d}K{i % 9 + 1}" for i in range(n)]


def _zipf_cdf(n: int) -> np.ndarray:
    """Cumulative 1/rank weights; real word pools are far from uniform."""
    w = 1.0 / np.arange(1, n + 1)
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    return cdf


@dataclass(frozen=True)
class SyntheticSpec:
    n_codes: int = 40
    patents_per_year: int = 300
    years: TimeWindow = TimeWindow(2000, 2011)
    n_planted: int = 5
    first_cooccur_years: tuple = (2008, 2009, 2009, 2010, 2010)
    n_established: int = 24
    words_per_code: int = 30
    n_common_words: int = 40
    bridge_words: int = 20
    title_len: int = 6
    abstract_len: int = 40
    drift_ramp_start: int = 2      # offset into the span where drift begins
    ramp_lead: int = 3             # years before first co-occurrence the ramp tops out
    f_max: float = 0.9
    planted_rate: int = 4          # co-occurrence patents per year from y0 on
    established_rate: float = 0.25 # chance a filler patent carries an established pair
    coverage_min: int = 2          # single-code patents per code per year
    common_frac: float = 0.15
    cite_rate: float = 0.3
    max_cites: int = 3

    def __post_init__(self):
        if self.n_codes < 2 or self.n_codes > len(make_codes(self.n_codes)):
            raise InfeasibleSpec(f"n_codes {self.n_codes} unusable")
        if 2 * self.n_planted > self.n_codes:
            raise InfeasibleSpec(
                f"{self.n_planted} disjoint pairs need {2 * self.n_planted} codes, have {self.n_codes}"
            )
        if len(self.first_cooccur_years) != self.n_planted:
            raise InfeasibleSpec("one first co-occurrence year per planted pair required")
        if self.ramp_lead < 0:
            raise InfeasibleSpec(f"ramp_lead must be >= 0, got {self.ramp_lead}")
        ramp0 = self.years.start_year + self.drift_ramp_start
        for y0 in self.first_cooccur_years:
            if y0 not in self.years:
                raise InfeasibleSpec(f"first co-occurrence {y0} outside {self.years}")
            if y0 - self.ramp_lead <= ramp0:
                raise InfeasibleSpec(f"no ramp room before first co-occurrence {y0}")
        n_pairs = self.n_codes * (self.n_codes - 1) // 2
        if self.n_established > n_pairs - self.n_planted:
            raise InfeasibleSpec(f"cannot pick {self.n_established} established pairs")
        floor = self.coverage_min * self.n_codes + self.planted_rate * self.n_planted
        if floor > self.patents_per_year:
            raise InfeasibleSpec(
                f"coverage and planted patents need {floor}/year, budget {self.patents_per_year}"
            )
        if not (0.0 < self.f_max <= 1.0):
            raise InfeasibleSpec(f"f_max must be in (0, 1], got {self.f_max}")
        for name in ("planted_rate", "coverage_min", "title_len", "abstract_len",
                     "words_per_code", "bridge_words"):
            if getattr(self, name) < 1:
                raise InfeasibleSpec(f"{name} must be positive")
        for name in ("established_rate", "common_frac", "cite_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InfeasibleSpec(f"{name} must be in [0, 1], got {v}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["years"] = str(self.years)
        d["first_cooccur_years"] = list(self.first_cooccur_years)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise InfeasibleSpec(f"unknown synthetic spec fields: {sorted(extra)}")
        kw = dict(d)
        if "years" in kw and isinstance(kw["years"], str):
            kw["years"] = TimeWindow.parse(kw["years"])
        if "first_cooccur_years" in kw:
            kw["first_cooccur_years"] = tuple(kw["first_cooccur_years"])
        return cls(**kw)


@dataclass(frozen=True)
class PlantedPair:
    pair: tuple
    first_year: int


@dataclass(frozen=True)
class SyntheticCorpus:
    corpus: Corpus
    planted: tuple
    established: tuple
    spec: SyntheticSpec
    seed: int

    def planted_pairs(self) -> list:
        return [p.pair for p in self.planted]


def drift_schedule(spec: SyntheticSpec, first_year: int) -> dict:
    """year -> bridge fraction: zero, then a linear ramp that tops out at
    f_max ``ramp_lead`` years before the first co-occurrence, flat after.

    Vocabularies finish converging before the codes ever share a patent;
    the co-occurrence is the lagging indicator, the language the leading
    one.
    """
    ramp0 = spec.years.start_year + spec.drift_ramp_start
    top = first_year - spec.ramp_lead
    out = {}
    for y in spec.years.years():
        if y < ramp0:
            out[y] = 0.0
        else:
            out[y] = min(spec.f_max, spec.f_max * (y - ramp0) / (top - ramp0))
    return out


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    codes = make_codes(spec.n_codes)

    shuffled = [codes[i] for i in rng.permutation(spec.n_codes)]
    planted = []
    for i in range(spec.n_planted):
        pair = canonical_pair(shuffled[2 * i], shuffled[2 * i + 1])
        planted.append(PlantedPair(pair=pair, first_year=spec.first_cooccur_years[i]))
    planted_set = {p.pair for p in planted}

    all_pairs = []
    for i, a in enumerate(codes):
        for b in codes[i + 1 :]:
            if (a, b) not in planted_set:
                all_pairs.append((a, b))
    est_idx = rng.choice(len(all_pairs), size=spec.n_established, replace=False)
    established = tuple(all_pairs[i] for i in sorted(est_idx))

    cluster = {c: [f"{c.lower()}w{j}" for j in range(spec.words_per_code)] for c in codes}
    common = [f"common{j}" for j in range(spec.n_common_words)]
    bridge = {p.pair: [f"bridge{i}x{j}" for j in range(spec.bridge_words)]
              for i, p in enumerate(planted)}
    slot_of = {}
    for p in planted:
        for c in p.pair:
            slot_of[c] = p
    drift = {p.pair: drift_schedule(spec, p.first_year) for p in planted}

    cluster_cdf = _zipf_cdf(spec.words_per_code)
    common_cdf = _zipf_cdf(spec.n_common_words)
    bridge_cdf = _zipf_cdf(spec.bridge_words)

    def draw(pool, cdf):
        return pool[int(np.searchsorted(cdf, rng.random(), side="right"))]

    def sample_words(pat_codes, year, n):
        words = []
        for _ in range(n):
            if rng.random() < spec.common_frac:
                words.append(draw(common, common_cdf))
                continue
            c = pat_codes[rng.integers(len(pat_codes))]
            p = slot_of.get(c)
            if p is not None and rng.random() < drift[p.pair][year]:
                words.append(draw(bridge[p.pair], bridge_cdf))
            else:
                words.append(draw(cluster[c], cluster_cdf))
        return " ".join(words)

    by_code_earlier = {c: [] for c in codes}
    records = []
    for year in spec.years.years():
        comp = []
        for c in codes:
            comp.extend([(c,)] * spec.coverage_min)
        for p in planted:
            if year >= p.first_year:
                comp.extend([p.pair] * spec.planted_rate)
        while len(comp) < spec.patents_per_year:
            if established and rng.random() < spec.established_rate:
                comp.append(established[rng.integers(len(established))])
            else:
                comp.append((codes[rng.integers(len(codes))],))
        comp = [comp[i] for i in rng.permutation(len(comp))]

        year_new = []
        for serial, pat_codes in enumerate(comp):
            pid = f"SYN-{year}-{serial:04d}"
            cites = []
            if rng.random() < spec.cite_rate:
                pool = sorted({q for c in pat_codes for q in by_code_earlier[c]})
                if pool:
                    k = int(rng.integers(1, spec.max_cites + 1))
                    take = min(k, len(pool))
                    idx = rng.choice(len(pool), size=take, replace=False)
                    cites = [pool[i] for i in sorted(idx)]
            records.append(
                PatentRecord(
                    id=pid,
                    pub_date=date(year, 1 + serial % 12, 1 + serial % 28),
                    title=sample_words(pat_codes, year, spec.title_len),
                    abstract=sample_words(pat_codes, year, spec.abstract_len),
                    codes=frozenset(pat_codes),
                    citations=tuple(cites),
                )
            )
            year_new.append((pid, pat_codes))
        for pid, pat_codes in year_new:
            for c in pat_codes:
                by_code_earlier[c].append(pid)

    return SyntheticCorpus(
        corpus=Corpus.from_records(records),
        planted=tuple(planted),
        established=established,
        spec=spec,
        seed=seed,
    )
