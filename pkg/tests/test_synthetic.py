"""Planted-convergence corpus generator checks."""

import dataclasses
import io

import pytest

from patentforge import (
    InfeasibleSpec,
    TimeWindow,
    cooccurrence_counts,
    serialize_corpus,
    truncate_code,
    window_slice,
)
from patentforge.evaluation.synthetic import (
    SyntheticSpec,
    drift_schedule,
    generate_synthetic,
    make_codes,
)

from conftest import TINY_SPEC


def corpus_bytes(corpus):
    buf = io.StringIO()
    serialize_corpus(corpus, buf)
    return buf.getvalue()


def test_make_codes_distinct_and_well_formed():
    codes = make_codes(40)
    assert len(set(codes)) == 40
    for c in codes:
        assert truncate_code(c) == c


def test_same_seed_bit_reproducible(tiny_synth):
    again = generate_synthetic(TINY_SPEC, seed=7)
    assert corpus_bytes(again.corpus) == corpus_bytes(tiny_synth.corpus)
    assert again.planted == tiny_synth.planted
    assert again.established == tiny_synth.established


def test_different_seed_differs(tiny_synth):
    other = generate_synthetic(TINY_SPEC, seed=8)
    assert corpus_bytes(other.corpus) != corpus_bytes(tiny_synth.corpus)


def test_record_count_and_years(tiny_synth):
    recs = list(tiny_synth.corpus)
    n_years = TINY_SPEC.years.end_year - TINY_SPEC.years.start_year + 1
    assert len(recs) == TINY_SPEC.patents_per_year * n_years
    years = {r.pub_date.year for r in recs}
    assert years == set(TINY_SPEC.years.years())


def test_every_code_covered_every_year(tiny_synth):
    codes = make_codes(TINY_SPEC.n_codes)
    for y in TINY_SPEC.years.years():
        sub = window_slice(tiny_synth.corpus, TimeWindow(y, y))
        count = {c: 0 for c in codes}
        for r in sub:
            for c in r.codes:
                count[c] += 1
        assert min(count.values()) >= TINY_SPEC.coverage_min


def test_multi_code_patents_are_only_planted_or_established(tiny_synth):
    allowed = set(tiny_synth.planted_pairs()) | set(tiny_synth.established)
    for r in tiny_synth.corpus:
        assert len(r.codes) in (1, 2)
        if len(r.codes) == 2:
            assert tuple(sorted(r.codes)) in allowed


def test_planted_pairs_first_cooccur_on_schedule(tiny_synth):
    for p in tiny_synth.planted:
        before = window_slice(
            tiny_synth.corpus, TimeWindow(TINY_SPEC.years.start_year, p.first_year - 1)
        )
        assert cooccurrence_counts(before).get(p.pair, 0) == 0
        for y in range(p.first_year, TINY_SPEC.years.end_year + 1):
            sub = window_slice(tiny_synth.corpus, TimeWindow(y, y))
            assert cooccurrence_counts(sub).get(p.pair, 0) == TINY_SPEC.planted_rate


def test_established_pairs_cooccur_before_any_planted_year(tiny_synth):
    first_planted = min(p.first_year for p in tiny_synth.planted)
    early = window_slice(
        tiny_synth.corpus, TimeWindow(TINY_SPEC.years.start_year, first_planted - 1)
    )
    counts = cooccurrence_counts(early)
    for pair in tiny_synth.established:
        assert counts.get(pair, 0) > 0


def test_citations_point_backward(tiny_synth):
    by_id = {r.id: r for r in tiny_synth.corpus}
    n_cites = 0
    for r in tiny_synth.corpus:
        for c in r.citations:
            assert by_id[c].pub_date.year < r.pub_date.year
            n_cites += 1
    assert n_cites > 0


def test_drift_schedule_shape():
    spec = SyntheticSpec()
    first = spec.first_cooccur_years[0]
    sched = drift_schedule(spec, first)
    years = list(spec.years.years())
    assert set(sched) == set(years)
    ramp0 = spec.years.start_year + spec.drift_ramp_start
    vals = [sched[y] for y in years]
    for y in years:
        if y < ramp0:
            assert sched[y] == 0.0
    # nondecreasing, capped at f_max, topped out ramp_lead years early
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert max(vals) == pytest.approx(spec.f_max)
    assert sched[first - spec.ramp_lead] == pytest.approx(spec.f_max)
    assert sched[first] == pytest.approx(spec.f_max)


def test_drift_zero_before_ramp_start_only():
    sched = drift_schedule(TINY_SPEC, TINY_SPEC.first_cooccur_years[0])
    ramp0 = TINY_SPEC.years.start_year + TINY_SPEC.drift_ramp_start
    assert sched[ramp0] == 0.0
    assert sched[ramp0 + 1] > 0.0


def test_spec_round_trip():
    d = TINY_SPEC.to_dict()
    assert isinstance(d["years"], str)
    again = SyntheticSpec.from_dict(d)
    assert again == TINY_SPEC


def test_spec_unknown_field_rejected():
    d = TINY_SPEC.to_dict()
    d["n_patenst_per_year"] = 10
    with pytest.raises(InfeasibleSpec):
        SyntheticSpec.from_dict(d)


def test_spec_validation():
    def build(**kw):
        return dataclasses.replace(SyntheticSpec(), **kw)

    with pytest.raises(InfeasibleSpec):
        build(n_planted=30)  # needs 60 codes
    with pytest.raises(InfeasibleSpec):
        build(first_cooccur_years=(2008, 2009))
    with pytest.raises(InfeasibleSpec):
        build(first_cooccur_years=(2008, 2009, 2009, 2010, 2025))
    with pytest.raises(InfeasibleSpec):
        build(first_cooccur_years=(2002, 2009, 2009, 2010, 2010))  # no ramp room
    with pytest.raises(InfeasibleSpec):
        build(f_max=1.5)
    with pytest.raises(InfeasibleSpec):
        build(patents_per_year=10)
    with pytest.raises(InfeasibleSpec):
        build(n_established=10**6)
    with pytest.raises(InfeasibleSpec):
        build(established_rate=1.5)
    with pytest.raises(InfeasibleSpec):
        build(abstract_len=0)


def test_default_spec_is_valid():
    spec = SyntheticSpec()
    assert spec.n_codes == 40
    assert spec.patents_per_year == 300
    assert spec.n_planted == 5


def test_zero_drift_spec_runs():
    spec = dataclasses.replace(TINY_SPEC, f_max=1e-9)
    out = generate_synthetic(spec, seed=1)
    sched = drift_schedule(spec, out.planted[0].first_year)
    assert max(sched.values()) <= 1e-9


def test_planted_codes_disjoint(tiny_synth):
    seen = set()
    for p in tiny_synth.planted:
        for c in p.pair:
            assert c not in seen
            seen.add(c)
