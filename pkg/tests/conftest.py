"""Shared fixtures.

Everything heavy is session-scoped so the expensive pieces (a tiny
trained model, its embedding store) are built once and reused across
test modules.  The acceptance tests keep their own, larger fixtures.
"""

import datetime as dt

import pytest

from patentforge import (
    Corpus,
    ModelConfig,
    PatentRecord,
    SyntheticSpec,
    TrainConfig,
    TimeWindow,
    build_tokenizer,
    encode_patent,
    extract_embeddings,
    generate_synthetic,
    train,
)


def make_record(pid, codes, year=2005, title="solid state battery cell",
                abstract="an electrode assembly with a ceramic separator",
                citations=(), month=6, day=15):
    return PatentRecord(
        id=pid,
        pub_date=dt.date(year, month, day),
        title=title,
        abstract=abstract,
        codes=frozenset(codes),
        citations=tuple(citations),
    )


@pytest.fixture
def three_patent_corpus():
    # {A,B}, {A,C}, {B,C}: the worked null-model example
    return Corpus.from_records([
        make_record("P1", {"A01B1", "B02C2"}),
        make_record("P2", {"A01B1", "C03D3"}),
        make_record("P3", {"B02C2", "C03D3"}),
    ])


TINY_SPEC = SyntheticSpec(
    n_codes=12,
    patents_per_year=40,
    years=TimeWindow(2000, 2007),
    n_planted=2,
    first_cooccur_years=(2006, 2007),
    n_established=6,
)


@pytest.fixture(scope="session")
def tiny_synth():
    return generate_synthetic(TINY_SPEC, seed=7)


@pytest.fixture(scope="session")
def tiny_trained(tiny_synth):
    """A 2-layer model trained for a few hundred steps on the tiny corpus.

    Not trained to convergence; enough for mechanism tests (embeddings,
    predictions, evaluation plumbing) that need a real checkpointable
    model rather than random weights.
    """
    corpus = tiny_synth.corpus
    tok = build_tokenizer(corpus, min_freq=2)
    mc = ModelConfig(vocab_size=tok.vocab_size, layers=2, heads=2,
                     model_dim=32, ff_dim=128, max_seq_len=64, seed=7)
    seqs = [encode_patent(tok, r, mc.max_seq_len) for r in corpus]
    tc = TrainConfig(steps=300, batch_size=16, seed=7)
    params, losses = train(seqs, mc, tc)
    return {"corpus": corpus, "tok": tok, "config": mc, "params": params,
            "losses": losses, "seqs": seqs, "synth": tiny_synth}


@pytest.fixture(scope="session")
def tiny_store(tiny_trained):
    return extract_embeddings(
        tiny_trained["params"], tiny_trained["config"], tiny_trained["tok"],
        tiny_trained["corpus"],
    )
