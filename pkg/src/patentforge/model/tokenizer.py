"""Word-level tokenizer whose vocabulary includes one token per technology code.

Word ids occupy a contiguous block after the reserved special tokens;
technology-code ids occupy a second contiguous block after the words, so
the two id spaces never overlap and the code block can be sliced out of a
logit vector directly.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from ..corpus import Corpus, PatentRecord, TechCode
from ..errors import EmptyCorpus, TooManyCodes
from .config import CLS_ID, N_SPECIAL, SEP_ID, SPECIAL_TOKENS, UNK_ID

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize_text(text: str) -> list:
    """Lower-case, punctuation-splitting word tokenization."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Tokenizer:
    word_vocab: dict
    tech_vocab: dict
    id_to_token: tuple

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_token)

    @property
    def n_words(self) -> int:
        return len(self.word_vocab)

    @property
    def n_tech(self) -> int:
        return len(self.tech_vocab)

    @property
    def tech_id_start(self) -> int:
        return N_SPECIAL + self.n_words

    def tech_ids(self) -> range:
        """The contiguous id block holding all technology-code tokens."""
        return range(self.tech_id_start, self.tech_id_start + self.n_tech)

    def word_id(self, token: str) -> int:
        return self.word_vocab.get(token, UNK_ID)

    def code_id(self, code: TechCode) -> int | None:
        return self.tech_vocab.get(code)

    def encode_words(self, text: str) -> list:
        return [self.word_id(t) for t in tokenize_text(text)]

    def decode(self, ids) -> list:
        return [self.id_to_token[i] for i in ids]

    def to_dict(self) -> dict:
        words = [None] * self.n_words
        for tok, i in self.word_vocab.items():
            words[i - N_SPECIAL] = tok
        techs = [None] * self.n_tech
        for code, i in self.tech_vocab.items():
            techs[i - self.tech_id_start] = code
        return {"words": words, "techs": techs}

    @classmethod
    def from_dict(cls, d: dict) -> "Tokenizer":
        return _build(d["words"], d["techs"])


def _build(words, techs) -> Tokenizer:
    word_vocab = {w: N_SPECIAL + i for i, w in enumerate(words)}
    start = N_SPECIAL + len(words)
    tech_vocab = {c: start + i for i, c in enumerate(techs)}
    id_to_token = [None] * (start + len(techs))
    for tok, i in SPECIAL_TOKENS.items():
        id_to_token[i] = tok
    for tok, i in word_vocab.items():
        id_to_token[i] = tok
    for tok, i in tech_vocab.items():
        id_to_token[i] = tok
    return Tokenizer(
        word_vocab=word_vocab,
        tech_vocab=tech_vocab,
        id_to_token=tuple(id_to_token),
    )


def build_tokenizer(corpus: Corpus, min_freq: int = 2) -> Tokenizer:
    """Vocabulary from corpus titles and abstracts plus all corpus codes.

    Words below ``min_freq`` map to UNK.  Word ids are assigned by
    descending frequency (ties alphabetical) and code ids by sorted code,
    so the tokenizer is a pure function of the corpus.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build a tokenizer from an empty corpus")
    freq = Counter()
    for rec in corpus:
        freq.update(tokenize_text(rec.title))
        freq.update(tokenize_text(rec.abstract))
    kept = sorted(
        (t for t, n in freq.items() if n >= min_freq),
        key=lambda t: (-freq[t], t),
    )
    return _build(kept, corpus.codes())


# ---------------------------------------------------------------------------
# Sequence encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodedSequence:
    """One patent laid out as ``[CLS] title [SEP] abstract [SEP] codes``.

    ``code_positions[i]`` is the index of ``codes[i]`` within ``ids``;
    ``cls_position`` is always 0.  ``ids`` holds no padding.
    """

    patent_id: str
    ids: tuple
    code_positions: tuple
    codes: tuple

    def __post_init__(self):
        if len(self.code_positions) != len(self.codes):
            raise ValueError("code_positions and codes must align")

    @property
    def cls_position(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.ids)


def encode_patent(
    tok: Tokenizer, rec: PatentRecord, max_seq_len: int
) -> EncodedSequence:
    """Encode one record, truncating text but never the code block.

    The abstract is shortened first; the title only once the abstract is
    gone.  If the codes alone cannot fit alongside the three structural
    tokens the record is rejected rather than silently clipped.
    """
    codes = rec.sorted_codes()
    overhead = 3  # [CLS] + two [SEP]
    budget = max_seq_len - overhead - len(codes)
    if budget < 0:
        raise TooManyCodes(
            f"{rec.id}: {len(codes)} codes exceed capacity "
            f"{max_seq_len - overhead}"
        )
    title = tok.encode_words(rec.title)
    abstract = tok.encode_words(rec.abstract)
    excess = len(title) + len(abstract) - budget
    if excess > 0:
        cut = min(excess, len(abstract))
        abstract = abstract[: len(abstract) - cut]
        excess -= cut
        if excess > 0:
            title = title[: len(title) - excess]
    ids = [CLS_ID] + title + [SEP_ID] + abstract + [SEP_ID]
    code_positions = tuple(range(len(ids), len(ids) + len(codes)))
    code_ids = []
    for c in codes:
        cid = tok.code_id(c)
        if cid is None:
            raise KeyError(f"{rec.id}: code {c} not in tokenizer vocabulary")
        code_ids.append(cid)
    ids = ids + code_ids
    return EncodedSequence(
        patent_id=rec.id,
        ids=tuple(ids),
        code_positions=code_positions,
        codes=codes,
    )
