"""Patent corpus parsing, validation, indexing, and year-window slicing.

A corpus is an immutable, fully indexed collection of patent records.  The
on-disk format is UTF-8 JSON lines, one record per line, with fields
``id``, ``pub_date`` (YYYY-MM-DD), ``title``, ``abstract``, ``ipc`` (array
of raw IPC strings, truncated to group level on ingest) and an optional
``citations`` array.
"""

from __future__ import annotations

import datetime as _dt
import io
import json
import re
from dataclasses import dataclass, field

from .errors import ConfigError, DuplicateId, EmptyCorpus, MalformedCode, ParseError

# Technology codes live at the IPC group level: section letter, two-digit
# class, subclass letter, 1-4 group digits.  Subgroups (after "/") dropped.
TechCode = str

CODE_PATTERN = re.compile(r"^[A-H][0-9]{2}[A-Z][0-9]{1,4}$")
_RAW_PREFIX = re.compile(r"^\s*([A-Ha-h])\s*([0-9]{2})\s*([A-Za-z])\s*([0-9]{1,4})")


def truncate_code(raw_ipc: str) -> TechCode:
    """Normalize a raw IPC string to its upper-cased group-level code.

    ``"A61K 31/4745"`` becomes ``"A61K31"``.  Raises :class:`MalformedCode`
    if the prefix before any "/" does not look like section + class +
    subclass + group.
    """
    if not isinstance(raw_ipc, str):
        raise MalformedCode(f"expected string, got {type(raw_ipc).__name__}")
    head = raw_ipc.split("/", 1)[0]
    m = _RAW_PREFIX.match(head)
    if m is None:
        raise MalformedCode(f"not an IPC group prefix: {raw_ipc!r}")
    code = (m.group(1) + m.group(2) + m.group(3) + m.group(4)).upper()
    if not CODE_PATTERN.match(code):
        raise MalformedCode(f"not an IPC group prefix: {raw_ipc!r}")
    return code


def is_valid_code(code: str) -> bool:
    return bool(CODE_PATTERN.match(code))


@dataclass(frozen=True)
class TimeWindow:
    """Inclusive publication-year interval."""

    start_year: int
    end_year: int

    def __post_init__(self):
        if self.start_year > self.end_year:
            raise ValueError(
                f"start_year {self.start_year} > end_year {self.end_year}"
            )

    def __contains__(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year

    def years(self) -> range:
        return range(self.start_year, self.end_year + 1)

    def __str__(self):
        return f"{self.start_year}:{self.end_year}"

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        """Parse ``"Y1:Y2"`` (also accepts a single ``"Y"``)."""
        parts = text.split(":")
        if len(parts) == 1:
            y = int(parts[0])
            return cls(y, y)
        if len(parts) != 2:
            raise ValueError(f"expected Y1:Y2, got {text!r}")
        return cls(int(parts[0]), int(parts[1]))


@dataclass(frozen=True)
class PatentRecord:
    """One patent: identity, date, text, group-level codes, citations."""

    id: str
    pub_date: _dt.date
    title: str
    abstract: str
    codes: frozenset
    citations: tuple = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("empty patent id")
        if not self.title:
            raise ValueError(f"{self.id}: empty title")
        if not self.abstract:
            raise ValueError(f"{self.id}: empty abstract")
        if not self.codes:
            raise ValueError(f"{self.id}: no technology codes")
        for c in self.codes:
            if not is_valid_code(c):
                raise ValueError(f"{self.id}: invalid code {c!r}")
        if self.id in self.citations:
            raise ValueError(f"{self.id}: record cites itself")

    @property
    def pub_year(self) -> int:
        return self.pub_date.year

    def sorted_codes(self) -> list:
        return sorted(self.codes)


@dataclass
class Corpus:
    """Ordered, indexed, immutable-after-construction patent collection."""

    records: tuple
    by_id: dict = field(repr=False)
    by_year: dict = field(repr=False)
    by_code: dict = field(repr=False)
    duplicate_codes_removed: int = 0

    @classmethod
    def from_records(cls, records, duplicate_codes_removed: int = 0) -> "Corpus":
        records = tuple(records)
        by_id = {}
        by_year = {}
        by_code = {}
        for rec in records:
            if rec.id in by_id:
                raise DuplicateId(f"duplicate patent id {rec.id!r}")
            by_id[rec.id] = rec
            by_year.setdefault(rec.pub_year, []).append(rec.id)
            for code in rec.sorted_codes():
                by_code.setdefault(code, []).append(rec.id)
        return cls(
            records=records,
            by_id=by_id,
            by_year=by_year,
            by_code=by_code,
            duplicate_codes_removed=duplicate_codes_removed,
        )

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def link_count(self) -> int:
        """Total patent-code links N of the bipartite network."""
        return sum(len(r.codes) for r in self.records)

    def codes(self) -> list:
        """All distinct codes, sorted."""
        return sorted(self.by_code)

    def years(self) -> list:
        return sorted(self.by_year)

    def year_span(self) -> TimeWindow:
        ys = self.years()
        if not ys:
            raise EmptyCorpus("corpus has no records")
        return TimeWindow(ys[0], ys[-1])


def code_support(corpus: Corpus, code: TechCode) -> int:
    """Number of patents carrying ``code``; 0 if the code never appears."""
    return len(corpus.by_code.get(code, ()))


def window_slice(corpus: Corpus, window: TimeWindow) -> Corpus:
    """Sub-corpus of records with pub_year inside the window, order kept."""
    kept = [r for r in corpus.records if r.pub_year in window]
    return Corpus.from_records(
        kept, duplicate_codes_removed=corpus.duplicate_codes_removed
    )


_FIELDS = ("id", "pub_date", "title", "abstract", "ipc", "citations")


def _parse_record(obj: dict, lineno: int):
    """Validate one decoded JSON object; returns (record, n_duplicate_codes)."""
    if not isinstance(obj, dict):
        raise ParseError(lineno, "record is not a JSON object")
    for name in ("id", "pub_date", "title", "abstract", "ipc"):
        if name not in obj:
            raise ParseError(lineno, f"missing field {name!r}")
    unknown = set(obj) - set(_FIELDS)
    if unknown:
        raise ParseError(lineno, f"unknown fields {sorted(unknown)}")

    pid = obj["id"]
    if not isinstance(pid, str) or not pid:
        raise ParseError(lineno, "id must be a nonempty string")
    try:
        pub_date = _dt.date.fromisoformat(obj["pub_date"])
    except (TypeError, ValueError):
        raise ParseError(lineno, f"bad pub_date {obj['pub_date']!r}") from None
    title = obj["title"]
    abstract = obj["abstract"]
    if not isinstance(title, str) or not title.strip():
        raise ParseError(lineno, "empty title")
    if not isinstance(abstract, str) or not abstract.strip():
        raise ParseError(lineno, "empty abstract")
    raw_codes = obj["ipc"]
    if not isinstance(raw_codes, list) or not raw_codes:
        raise ParseError(lineno, "ipc must be a nonempty array")
    codes = []
    for raw in raw_codes:
        try:
            codes.append(truncate_code(raw))
        except MalformedCode as exc:
            raise ParseError(lineno, str(exc)) from None
    n_dups = len(codes) - len(set(codes))
    citations = obj.get("citations", [])
    if citations is None:
        citations = []
    if not isinstance(citations, list) or any(
        not isinstance(c, str) for c in citations
    ):
        raise ParseError(lineno, "citations must be an array of strings")
    try:
        rec = PatentRecord(
            id=pid,
            pub_date=pub_date,
            title=title,
            abstract=abstract,
            codes=frozenset(codes),
            citations=tuple(citations),
        )
    except ValueError as exc:
        raise ParseError(lineno, str(exc)) from None
    return rec, n_dups


def parse_corpus(stream) -> Corpus:
    """Parse newline-delimited records from a byte or text stream.

    Accepts a readable stream, ``bytes``, or ``str``.  Duplicate codes
    within a record are dropped; the total dropped count is surfaced as
    ``Corpus.duplicate_codes_removed``.  Raises :class:`ParseError` with
    the offending line number, :class:`DuplicateId`, or
    :class:`EmptyCorpus` when no valid record is present.
    """
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(getattr(stream, "read", None), type(None)):
        raise TypeError("stream must be bytes, str, or a readable object")

    records = []
    seen_ids = set()
    n_dups = 0
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        rec, d = _parse_record(obj, lineno)
        if rec.id in seen_ids:
            raise DuplicateId(f"duplicate patent id {rec.id!r} at line {lineno}")
        seen_ids.add(rec.id)
        n_dups += d
        records.append(rec)
    if not records:
        raise EmptyCorpus("no valid records in stream")
    return Corpus.from_records(records, duplicate_codes_removed=n_dups)


def serialize_corpus(corpus: Corpus, stream) -> None:
    """Write the corpus in the canonical JSON-lines form (codes truncated)."""
    for rec in corpus.records:
        obj = {
            "id": rec.id,
            "pub_date": rec.pub_date.isoformat(),
            "title": rec.title,
            "abstract": rec.abstract,
            "ipc": rec.sorted_codes(),
            "citations": list(rec.citations),
        }
        stream.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_corpus(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_corpus(fh)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        serialize_corpus(corpus, fh)


def year_ordered_split(corpus: Corpus, fracs=(0.8, 0.1, 0.1)):
    """Chronological train/val/test split: oldest records train, newest test.

    Held-out patents postdate everything the model sees, which is the
    honest setting for forecasting-flavored evaluations.  Ties within a
    publication date break by id, so the split is a pure function of the
    corpus.
    """
    if len(fracs) != 3 or abs(sum(fracs) - 1.0) > 1e-9 or min(fracs) < 0.0:
        raise ConfigError(f"fracs must be three nonnegative values summing to 1, got {fracs}")
    recs = sorted(corpus.records, key=lambda r: (r.pub_date, r.id))
    n = len(recs)
    a = int(fracs[0] * n)
    b = a + int(fracs[1] * n)
    return recs[:a], recs[a:b], recs[b:]
