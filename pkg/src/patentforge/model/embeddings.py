"""Per-code and per-patent embeddings read from the trained encoder.

A store holds one row per (patent, code) pair, read from the final
hidden layer at that code's token position, plus one CLS row per patent.
Rows remember the patent's publication year so a single store can serve
per-year similarity series.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..corpus import TimeWindow
from ..errors import (
    CorruptStore,
    DimMismatch,
    EmptyCorpus,
    NoEmbeddings,
    TooManyCodes,
)
from .checkpoint import model_fingerprint
from .config import CLS_ID, MASK_ID, SEP_ID, ModelConfig
from .encoder import encoder_forward, mlm_logits, pad_batch, softmax
from .tokenizer import Tokenizer, encode_patent

STORE_MAGIC = b"TTE1"


@dataclass
class EmbeddingStore:
    dim: int
    tech_ids: np.ndarray      # (n,) str
    tech_codes: np.ndarray    # (n,) str
    tech_years: np.ndarray    # (n,) int
    tech_vecs: np.ndarray     # (n, dim) float32
    cls_ids: np.ndarray       # (m,) str
    cls_years: np.ndarray     # (m,) int
    cls_vecs: np.ndarray      # (m, dim) float32
    window: TimeWindow | None = None
    model_hash: str = ""
    n_skipped: int = 0
    _code_rows: dict = field(init=False, repr=False)
    _cls_row: dict = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.tech_ids)
        if not (len(self.tech_codes) == len(self.tech_years) == n == self.tech_vecs.shape[0]):
            raise ValueError("tech arrays must have matching lengths")
        m = len(self.cls_ids)
        if not (len(self.cls_years) == m == self.cls_vecs.shape[0]):
            raise ValueError("cls arrays must have matching lengths")
        if (n and self.tech_vecs.shape[1] != self.dim) or (m and self.cls_vecs.shape[1] != self.dim):
            raise ValueError("vector width disagrees with dim")
        seen = set(zip(self.tech_ids.tolist(), self.tech_codes.tolist()))
        if len(seen) != n:
            raise ValueError("duplicate (patent, code) row")
        self._cls_row = {pid: i for i, pid in enumerate(self.cls_ids.tolist())}
        if len(self._cls_row) != m:
            raise ValueError("duplicate CLS row")
        rows = {}
        for i, code in enumerate(self.tech_codes.tolist()):
            rows.setdefault(code, []).append(i)
        self._code_rows = {c: np.asarray(r) for c, r in rows.items()}

    @property
    def n_tech(self) -> int:
        return len(self.tech_ids)

    @property
    def n_cls(self) -> int:
        return len(self.cls_ids)

    def codes(self) -> list:
        return sorted(self._code_rows)

    def rows_for(self, code, years=None) -> np.ndarray:
        """Row indices holding embeddings of ``code``, optionally
        restricted to a collection of publication years."""
        rows = self._code_rows.get(code)
        if rows is None:
            raise NoEmbeddings(f"no embeddings for code {code}")
        if years is not None:
            keep = np.isin(self.tech_years[rows], list(years))
            rows = rows[keep]
        return rows

    def vectors_for(self, code, years=None) -> np.ndarray:
        rows = self.rows_for(code, years)
        if rows.size == 0:
            raise NoEmbeddings(f"no embeddings for code {code} in requested years")
        return self.tech_vecs[rows]

    def cls_vector(self, patent_id) -> np.ndarray:
        row = self._cls_row.get(patent_id)
        if row is None:
            raise NoEmbeddings(f"no CLS embedding for patent {patent_id}")
        return self.cls_vecs[row]

    def cls_vectors_for(self, code, years=None) -> np.ndarray:
        """CLS vectors of the patents that carry ``code``."""
        rows = self.rows_for(code, years)
        if rows.size == 0:
            raise NoEmbeddings(f"no embeddings for code {code} in requested years")
        idx = [self._cls_row[p] for p in self.tech_ids[rows].tolist()]
        return self.cls_vecs[np.asarray(idx)]

    # -- serialization ------------------------------------------------------

    def save(self, path):
        all_ids = list(self.tech_ids) + list(self.cls_ids)
        id_width = max((len(s.encode()) for s in all_ids), default=1)
        code_width = max((len(s.encode()) for s in self.tech_codes), default=1)
        header = {
            "dim": self.dim,
            "n_tech": self.n_tech,
            "n_cls": self.n_cls,
            "window": str(self.window) if self.window is not None else "",
            "model_hash": self.model_hash,
            "id_width": id_width,
            "code_width": code_width,
            "n_skipped": self.n_skipped,
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        tech_dt = _tech_dtype(id_width, code_width, self.dim)
        cls_dt = _cls_dtype(id_width, self.dim)
        tech = np.zeros(self.n_tech, dtype=tech_dt)
        tech["id"] = self.tech_ids
        tech["code"] = self.tech_codes
        tech["year"] = self.tech_years
        tech["vec"] = self.tech_vecs
        cls_arr = np.zeros(self.n_cls, dtype=cls_dt)
        cls_arr["id"] = self.cls_ids
        cls_arr["year"] = self.cls_years
        cls_arr["vec"] = self.cls_vecs
        with open(path, "wb") as f:
            f.write(STORE_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(tech.tobytes())
            f.write(cls_arr.tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingStore":
        with open(path, "rb") as f:
            raw = f.read()
        if raw[:4] != STORE_MAGIC:
            raise CorruptStore(f"{path}: bad magic {raw[:4]!r}")
        (hlen,) = struct.unpack("<I", raw[4:8])
        try:
            header = json.loads(raw[8 : 8 + hlen].decode())
        except ValueError as e:
            raise CorruptStore(f"{path}: unreadable header ({e})") from e
        dim = header["dim"]
        tech_dt = _tech_dtype(header["id_width"], header["code_width"], dim)
        cls_dt = _cls_dtype(header["id_width"], dim)
        off = 8 + hlen
        tech_bytes = header["n_tech"] * tech_dt.itemsize
        cls_bytes = header["n_cls"] * cls_dt.itemsize
        if len(raw) != off + tech_bytes + cls_bytes:
            raise CorruptStore(f"{path}: size mismatch")
        tech = np.frombuffer(raw, dtype=tech_dt, count=header["n_tech"], offset=off)
        cls_arr = np.frombuffer(raw, dtype=cls_dt, count=header["n_cls"], offset=off + tech_bytes)
        window = TimeWindow.parse(header["window"]) if header["window"] else None

        def to_str(a):
            return np.asarray([b.decode() for b in a.tolist()], dtype=object)

        return cls(
            dim=dim,
            tech_ids=to_str(tech["id"]),
            tech_codes=to_str(tech["code"]),
            tech_years=tech["year"].astype(np.int64),
            tech_vecs=np.ascontiguousarray(tech["vec"]),
            cls_ids=to_str(cls_arr["id"]),
            cls_years=cls_arr["year"].astype(np.int64),
            cls_vecs=np.ascontiguousarray(cls_arr["vec"]),
            window=window,
            model_hash=header["model_hash"],
            n_skipped=header["n_skipped"],
        )


def merge_stores(stores) -> EmbeddingStore:
    """Concatenate stores row-wise; (patent, code) uniqueness still holds.

    Window becomes the covering span; the model hash survives only when
    every part agrees on it.
    """
    stores = list(stores)
    if not stores:
        raise EmptyCorpus("no stores to merge")
    if len(stores) == 1:
        return stores[0]
    dims = {s.dim for s in stores}
    if len(dims) != 1:
        raise DimMismatch(f"stores disagree on dim: {sorted(dims)}")
    hashes = {s.model_hash for s in stores}
    windows = [s.window for s in stores if s.window is not None]
    window = None
    if windows and len(windows) == len(stores):
        window = TimeWindow(
            min(w.start_year for w in windows), max(w.end_year for w in windows)
        )
    cls_seen = set()
    cls_keep = []   # (store_idx, row) for first sighting of each patent
    for si, s in enumerate(stores):
        for row, pid in enumerate(s.cls_ids.tolist()):
            if pid not in cls_seen:
                cls_seen.add(pid)
                cls_keep.append((si, row))
    return EmbeddingStore(
        dim=stores[0].dim,
        tech_ids=np.concatenate([s.tech_ids for s in stores]),
        tech_codes=np.concatenate([s.tech_codes for s in stores]),
        tech_years=np.concatenate([s.tech_years for s in stores]),
        tech_vecs=np.concatenate([s.tech_vecs for s in stores]),
        cls_ids=np.asarray([stores[si].cls_ids[r] for si, r in cls_keep], dtype=object),
        cls_years=np.asarray([stores[si].cls_years[r] for si, r in cls_keep]),
        cls_vecs=np.asarray(
            [stores[si].cls_vecs[r] for si, r in cls_keep], dtype=np.float32
        ).reshape(len(cls_keep), stores[0].dim),
        window=window,
        model_hash=hashes.pop() if len(hashes) == 1 else "",
        n_skipped=sum(s.n_skipped for s in stores),
    )


def _tech_dtype(id_width, code_width, dim):
    return np.dtype(
        [("id", f"S{id_width}"), ("code", f"S{code_width}"), ("year", "<u2"), ("vec", "<f4", (dim,))]
    )


def _cls_dtype(id_width, dim):
    return np.dtype([("id", f"S{id_width}"), ("year", "<u2"), ("vec", "<f4", (dim,))])


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


def extract_embeddings(
    params,
    config: ModelConfig,
    tok: Tokenizer,
    corpus,
    window: TimeWindow | None = None,
    batch_size=64,
) -> EmbeddingStore:
    """Run the encoder over (a window of) the corpus, no masking, and
    collect code-position and CLS hidden states from the last layer.

    Records whose code block cannot fit are counted and skipped.
    """
    records = [r for r in corpus if window is None or r.pub_year in window]
    if not records:
        raise EmptyCorpus("no records in extraction window")
    seqs = []
    skipped = 0
    for r in records:
        try:
            seqs.append((r, encode_patent(tok, r, config.max_seq_len)))
        except TooManyCodes:
            skipped += 1
    if not seqs:
        raise EmptyCorpus("every record in the window was skipped")
    t_ids, t_codes, t_years, t_vecs = [], [], [], []
    c_ids, c_years, c_vecs = [], [], []
    for i in range(0, len(seqs), batch_size):
        chunk = seqs[i : i + batch_size]
        ids, mask = pad_batch([s.ids for _, s in chunk])
        h, _ = encoder_forward(params, config, ids, mask, want_cache=False)
        for j, (rec, seq) in enumerate(chunk):
            c_ids.append(rec.id)
            c_years.append(rec.pub_year)
            c_vecs.append(h[j, seq.cls_position])
            for code, pos in zip(seq.codes, seq.code_positions):
                t_ids.append(rec.id)
                t_codes.append(code)
                t_years.append(rec.pub_year)
                t_vecs.append(h[j, pos])
    return EmbeddingStore(
        dim=config.model_dim,
        tech_ids=np.asarray(t_ids, dtype=object),
        tech_codes=np.asarray(t_codes, dtype=object),
        tech_years=np.asarray(t_years, dtype=np.int64),
        tech_vecs=np.asarray(t_vecs, dtype=np.float32),
        cls_ids=np.asarray(c_ids, dtype=object),
        cls_years=np.asarray(c_years, dtype=np.int64),
        cls_vecs=np.asarray(c_vecs, dtype=np.float32),
        window=window,
        model_hash=model_fingerprint(params, config),
        n_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Free-text encoding and code prediction
# ---------------------------------------------------------------------------


def _text_ids(tok: Tokenizer, title, abstract, budget):
    """Title and abstract word ids trimmed to fit, abstract first."""
    t = tok.encode_words(title)
    a = tok.encode_words(abstract)
    excess = len(t) + len(a) - budget
    if excess > 0:
        cut = min(excess, len(a))
        a = a[: len(a) - cut]
        excess -= cut
        if excess > 0:
            t = t[: len(t) - excess]
    return t, a


def encode_text_cls(params, config: ModelConfig, tok: Tokenizer, title="", abstract=""):
    """CLS hidden state for free text laid out like a patent header."""
    t, a = _text_ids(tok, title, abstract, config.max_seq_len - 3)
    ids = [CLS_ID] + t + [SEP_ID] + a + [SEP_ID]
    ids_arr = np.asarray([ids], dtype=np.int64)
    mask = np.ones_like(ids_arr, dtype=bool)
    h, _ = encoder_forward(params, config, ids_arr, mask, want_cache=False)
    return h[0, 0]


@dataclass(frozen=True)
class CodePrediction:
    """Distribution over the code vocabulary for one title/abstract.

    ``codes`` lists every known code (sorted); ``probs`` aligns with it
    and sums to one.  ``chosen`` is the thresholded prediction set,
    highest probability first, falling back to the single best code.
    """

    codes: tuple
    probs: np.ndarray
    chosen: tuple

    def prob_of(self, code) -> float:
        return float(self.probs[self.codes.index(code)])


def predict_codes(
    params,
    config: ModelConfig,
    tok: Tokenizer,
    title,
    abstract,
    threshold=None,
) -> CodePrediction:
    """Fill-in-the-blank code assignment from a masked code slot.

    The text is laid out as at training time with a single [MASK] in the
    code block; the output distribution over the vocabulary is restricted
    to code tokens and renormalized.
    """
    t, a = _text_ids(tok, title, abstract, config.max_seq_len - 4)
    ids = [CLS_ID] + t + [SEP_ID] + a + [SEP_ID] + [MASK_ID]
    ids_arr = np.asarray([ids], dtype=np.int64)
    mask = np.ones_like(ids_arr, dtype=bool)
    h, _ = encoder_forward(params, config, ids_arr, mask, want_cache=False)
    logits = mlm_logits(params, h[0, -1][None, :])[0]
    start = tok.tech_id_start
    block = logits[start : start + tok.n_tech].astype(np.float64)
    probs = softmax(block)
    codes = tuple(tok.id_to_token[start : start + tok.n_tech])
    order = np.argsort(-probs, kind="stable")
    if threshold is None:
        chosen = (codes[order[0]],)
    else:
        chosen = tuple(codes[i] for i in order if probs[i] >= threshold)
        if not chosen:
            chosen = (codes[order[0]],)
    return CodePrediction(codes=codes, probs=probs, chosen=chosen)
