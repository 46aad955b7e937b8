"""Record parsing, code truncation, windows, and the chronological split."""

import datetime as dt
import io

import numpy as np
import pytest

from patentforge import (
    Corpus,
    DuplicateId,
    EmptyCorpus,
    MalformedCode,
    ConfigError,
    ParseError,
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

from conftest import make_record


# ---------------------------------------------------------------------------
# truncate_code
# ---------------------------------------------------------------------------


def test_truncate_group_level():
    assert truncate_code("A61K 31/4745") == "A61K31"


def test_truncate_case_normalization():
    assert truncate_code("h01l 21/02") == "H01L21"


def test_truncate_rejects_malformed():
    with pytest.raises(MalformedCode):
        truncate_code("B0X")


def test_truncate_more_shapes():
    assert truncate_code("G06F17/30") == "G06F17"
    assert truncate_code("  C07D 401/12 ") == "C07D401"
    assert truncate_code("A01B1") == "A01B1"
    assert truncate_code("A 61 K 31/00") == "A61K31"  # WIPO display spacing
    for bad in ["", "A6", "1234", "AB1K31", "A61K/31", "I01B1"]:
        with pytest.raises(MalformedCode):
            truncate_code(bad)


def test_truncate_idempotent_on_random_codes():
    rng = np.random.default_rng(0)
    letters = "ABCDEFGH"
    for _ in range(50):
        code = "%s%02d%s%d" % (
            letters[rng.integers(8)], rng.integers(1, 100),
            letters[rng.integers(8)], rng.integers(1, 500),
        )
        assert truncate_code(code) == code
        assert truncate_code(code.lower() + " 12/34") == code


# ---------------------------------------------------------------------------
# TimeWindow
# ---------------------------------------------------------------------------


def test_window_basics():
    w = TimeWindow(2006, 2010)
    assert 2006 in w and 2010 in w and 2011 not in w
    assert list(w.years()) == [2006, 2007, 2008, 2009, 2010]
    assert str(w) == "2006:2010"
    assert TimeWindow.parse("2006:2010") == w


def test_window_rejects_reversed():
    with pytest.raises(Exception):
        TimeWindow(2010, 2006)
    with pytest.raises(Exception):
        TimeWindow.parse("2010:x")


# ---------------------------------------------------------------------------
# records and corpus indices
# ---------------------------------------------------------------------------


def test_record_validation():
    with pytest.raises(ValueError):
        make_record("P1", set())  # no codes
    with pytest.raises(ValueError):
        make_record("", {"A01B1"})
    with pytest.raises(ValueError):
        make_record("P1", {"A01B1"}, citations=("P1",))  # self citation
    with pytest.raises(ValueError):
        make_record("P1", {"not a code"})


def test_corpus_indices_resolve(three_patent_corpus):
    c = three_patent_corpus
    assert len(c) == 3
    assert c.by_id["P2"].id == "P2"
    for code, ids in c.by_code.items():
        for pid in ids:
            assert code in c.by_id[pid].codes
    # inverted index sizes sum to the bipartite link count
    assert sum(len(v) for v in c.by_code.values()) == c.link_count == 6


def test_duplicate_id_rejected():
    with pytest.raises(DuplicateId):
        Corpus.from_records([make_record("P1", {"A01B1"}),
                             make_record("P1", {"B02C2"})])


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _line(pid="P1", date="2005-06-15", title="t", abstract="a",
          ipc=("A61K 31/4745",), **extra):
    import json
    obj = {"id": pid, "pub_date": date, "title": title,
           "abstract": abstract, "ipc": list(ipc)}
    obj.update(extra)
    return json.dumps(obj)


def test_parse_three_lines():
    text = "\n".join([_line("P1"), _line("P2", ipc=["H01L 21/02"]),
                      _line("P3", citations=["P1"])]) + "\n"
    c = parse_corpus(text)
    assert len(c) == 3
    assert c.by_id["P1"].codes == frozenset({"A61K31"})
    assert c.by_id["P2"].codes == frozenset({"H01L21"})
    assert c.by_id["P3"].citations == ("P1",)


def test_parse_empty_abstract_rejected():
    with pytest.raises(ParseError) as e:
        parse_corpus(_line("P1") + "\n" + _line("P2", abstract="  "))
    assert e.value.lineno == 2


def test_parse_duplicate_id():
    with pytest.raises(DuplicateId):
        parse_corpus(_line("P1") + "\n" + _line("P1"))


def test_parse_bad_json_line_number():
    with pytest.raises(ParseError) as e:
        parse_corpus(_line() + "\n{oops\n")
    assert e.value.lineno == 2


def test_parse_empty_stream():
    with pytest.raises(EmptyCorpus):
        parse_corpus("\n\n")


def test_parse_bad_date_and_missing_field():
    with pytest.raises(ParseError):
        parse_corpus(_line(date="2005-13-45"))
    with pytest.raises(ParseError):
        parse_corpus('{"id": "P1"}')
    with pytest.raises(ParseError):
        parse_corpus(_line(bogus=1))


def test_parse_duplicate_codes_counted():
    c = parse_corpus(_line(ipc=["A61K 31/4745", "A61K 31/99", "H01L 21/02"]))
    # two raw codes truncate to the same group code
    assert c.by_id["P1"].codes == frozenset({"A61K31", "H01L21"})
    assert c.duplicate_codes_removed == 1


def test_parse_accepts_bytes():
    c = parse_corpus(_line().encode("utf-8"))
    assert len(c) == 1


def test_roundtrip_identity(tmp_path):
    rng = np.random.default_rng(3)
    codes = ["A01B1", "B02C2", "C03D3", "G06F17", "H01L21"]
    records = []
    for i in range(30):
        k = int(rng.integers(1, 4))
        picks = rng.choice(len(codes), size=k, replace=False)
        records.append(make_record(
            "P%03d" % i, {codes[j] for j in picks},
            year=int(rng.integers(2000, 2012)),
            citations=tuple("P%03d" % j for j in range(i) if rng.random() < 0.05),
        ))
    c = Corpus.from_records(records)
    buf = io.StringIO()
    serialize_corpus(c, buf)
    c2 = parse_corpus(buf.getvalue())
    buf2 = io.StringIO()
    serialize_corpus(c2, buf2)
    assert buf.getvalue() == buf2.getvalue()
    assert [r.id for r in c2] == [r.id for r in c]

    p = tmp_path / "c.jsonl"
    save_corpus(c, p)
    assert [r.id for r in load_corpus(p)] == [r.id for r in c]


# ---------------------------------------------------------------------------
# slicing and support
# ---------------------------------------------------------------------------


def _year_corpus():
    return Corpus.from_records([
        make_record("P1", {"A01B1"}, year=2006),
        make_record("P2", {"A01B1", "B02C2"}, year=2011),
    ])


def test_window_slice_examples():
    c = _year_corpus()
    assert len(window_slice(c, TimeWindow(2006, 2010))) == 1
    assert len(window_slice(c, TimeWindow(1900, 1901))) == 0
    assert [r.id for r in window_slice(c, TimeWindow(2011, 2011))] == ["P2"]
    full = window_slice(c, TimeWindow(2006, 2011))
    assert sorted(r.id for r in full) == ["P1", "P2"]


def test_code_support(three_patent_corpus):
    c = three_patent_corpus
    assert code_support(c, "A01B1") == 2
    assert code_support(c, "Z99Z9") == 0
    one = Corpus.from_records([make_record("P%d" % i, {"A01B1"}, year=2000 + i)
                               for i in range(4)])
    assert code_support(one, "A01B1") == 4


def test_support_sums_to_link_count():
    rng = np.random.default_rng(11)
    codes = ["A01B%d" % i for i in range(1, 8)]
    recs = []
    for i in range(40):
        k = int(rng.integers(1, 5))
        picks = rng.choice(len(codes), size=k, replace=False)
        recs.append(make_record("P%02d" % i, {codes[j] for j in picks},
                                year=int(rng.integers(2000, 2005))))
    c = Corpus.from_records(recs)
    assert sum(code_support(c, code) for code in c.codes()) == c.link_count


# ---------------------------------------------------------------------------
# chronological split
# ---------------------------------------------------------------------------


def test_year_ordered_split_sizes_and_order():
    recs = [make_record("P%03d" % i, {"A01B1"}, year=2000 + i % 10,
                        month=1 + i % 12) for i in range(100)]
    c = Corpus.from_records(recs)
    tr, va, te = year_ordered_split(c)
    assert (len(tr), len(va), len(te)) == (80, 10, 10)
    assert {r.id for r in tr} | {r.id for r in va} | {r.id for r in te} \
        == {r.id for r in c}
    assert max(r.pub_date for r in tr) <= min(r.pub_date for r in va)
    assert max(r.pub_date for r in va) <= min(r.pub_date for r in te)


def test_year_ordered_split_deterministic_under_shuffle():
    rng = np.random.default_rng(5)
    recs = [make_record("P%03d" % i, {"A01B1"}, year=int(rng.integers(2000, 2010)))
            for i in range(57)]
    c1 = Corpus.from_records(recs)
    order = rng.permutation(len(recs))
    c2 = Corpus.from_records([recs[i] for i in order])
    s1 = year_ordered_split(c1)
    s2 = year_ordered_split(c2)
    for part1, part2 in zip(s1, s2):
        assert [r.id for r in part1] == [r.id for r in part2]


def test_year_ordered_split_bad_fracs():
    c = Corpus.from_records([make_record("P1", {"A01B1"})])
    with pytest.raises(ConfigError):
        year_ordered_split(c, fracs=(0.5, 0.5))
    with pytest.raises(ConfigError):
        year_ordered_split(c, fracs=(0.9, 0.2, -0.1))
