"""forge: one command-line entry point for the whole workflow.

Two ways to use each subcommand.  Bare (or with just --config/--out-dir)
it runs the matching pipeline stage inside the output directory,
building missing prerequisite artifacts on demand; with its file flags
it acts directly on the named paths and leaves the pipeline layout
alone.  Flags always override config-file fields.

Exit codes: 0 ok, 2 bad config or missing input path, 3 bad or missing
data, 4 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .corpus import (
    Corpus,
    TimeWindow,
    load_corpus,
    save_corpus,
    year_ordered_split,
)
from .errors import (
    ConfigError,
    CorruptCheckpoint,
    CorruptStore,
    CountMismatch,
    DegenerateSigma,
    DuplicateId,
    EmptyCorpus,
    EmptyStore,
    ForgeError,
    InfeasibleSpec,
    InsufficientCandidates,
    InsufficientCodes,
    KeyMismatch,
    MalformedCode,
    MissingResults,
    NoEmbeddings,
    NoRelevant,
    ParseError,
    SingleClass,
    TooManyCodes,
    UnknownCode,
)
from .evaluation.synthetic import SyntheticSpec, generate_synthetic
from .evaluation.tasks import citation_eval, ipc_eval, knn_ipc_eval, title_abstract_eval
from .model import (
    build_tokenizer,
    encode_patent,
    extract_embeddings,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .model.embeddings import EmbeddingStore, merge_stores
from .nullmodel import canonical_pair
from .pipeline import ExperimentConfig, RunPaths, _fmt, _write_csv, run_pipeline
from .similarity import CS_METHODS, CSConfig, cs_timeseries

_CONFIG_ERRORS = (ConfigError, InfeasibleSpec, FileNotFoundError)
_DATA_ERRORS = (
    ParseError, DuplicateId, MalformedCode, EmptyCorpus, EmptyStore,
    CorruptCheckpoint, CorruptStore, MissingResults, UnknownCode,
    TooManyCodes, InsufficientCandidates, InsufficientCodes, NoEmbeddings,
    KeyMismatch, CountMismatch, NoRelevant, SingleClass, DegenerateSigma,
)

_limiter = None


def _cap_threads():
    """FORGE_THREADS caps BLAS/OpenMP pools for every stage."""
    global _limiter
    raw = os.environ.get("FORGE_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FORGE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError(f"FORGE_THREADS must be >= 1, got {n}")
    import threadpoolctl

    _limiter = threadpoolctl.threadpool_limits(limits=n)


def _build_config(args) -> ExperimentConfig:
    """Config file (if any) + flag overrides, in that order."""
    if getattr(args, "config", None):
        d = ExperimentConfig.from_file(args.config).to_dict()
    else:
        d = ExperimentConfig().to_dict()
    if getattr(args, "out_dir", None):
        d["out_dir"] = args.out_dir
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
        d["train"]["seed"] = args.seed
        d["backtest"]["seed"] = args.seed
    if getattr(args, "input", None):
        d["corpus_path"] = args.input
    if getattr(args, "min_year", None) is not None:
        d["min_year"] = args.min_year
    if getattr(args, "max_year", None) is not None:
        d["max_year"] = args.max_year
    if getattr(args, "spec", None):
        spec_path = Path(args.spec)
        if not spec_path.exists():
            raise ConfigError(f"spec file not found: {args.spec}")
        spec = json.loads(spec_path.read_text(encoding="utf-8"))
        if "seed" in spec:
            d["seed"] = int(spec.pop("seed"))
        d["synthetic"] = spec
    if getattr(args, "train_window", None):
        d["backtest"]["train_window"] = args.train_window
    if getattr(args, "test_window", None):
        d["backtest"]["test_windows"] = [args.test_window]
    if getattr(args, "ci", None) is not None:
        d["backtest"]["class_imbalance"] = args.ci
    if getattr(args, "min_support", None) is not None:
        d["backtest"]["min_support"] = args.min_support
    if getattr(args, "method", None):
        d["cs"]["method"] = args.method
    if getattr(args, "x", None) is not None:
        d["cs"]["x_percent"] = args.x
    if getattr(args, "smooth", None) is not None:
        d["cs"]["window_smoothing"] = args.smooth
    if getattr(args, "window", None):
        d["embed_window"] = args.window
    if getattr(args, "task", None):
        d["tasks"]["which"] = args.task
    return ExperimentConfig.from_dict(d)


def _read_pairs_file(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"pairs file not found: {path}")
    pairs = []
    for raw in p.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [x.strip() for x in (line.split(",") if "," in line else line.split())]
        if len(parts) != 2:
            raise ConfigError(f"bad pairs line: {raw!r}")
        pairs.append(canonical_pair(*parts))
    if not pairs:
        raise ConfigError(f"no pairs in {path}")
    return sorted(set(pairs))


# ------------------------------------------------------------- commands


def _cmd_ingest(args) -> int:
    cfg = _build_config(args)
    if args.input and args.output:
        src = Path(args.input)
        if not src.exists():
            raise ConfigError(f"corpus path not found: {src}")
        corpus = load_corpus(src)
        n_raw = len(corpus)
        lo, hi = args.min_year, args.max_year
        if lo is not None or hi is not None:
            kept = [r for r in corpus
                    if (lo is None or r.pub_year >= lo)
                    and (hi is None or r.pub_year <= hi)]
            corpus = Corpus.from_records(
                kept, duplicate_codes_removed=corpus.duplicate_codes_removed)
        save_corpus(corpus, args.output)
        print(f"ingest: read {n_raw}, kept {len(corpus)}, "
              f"dropped duplicate codes {corpus.duplicate_codes_removed} "
              f"-> {args.output}")
        return 0
    if cfg.corpus_path is None:
        raise ConfigError("ingest needs --input (or corpus_path in the config)")
    run_pipeline(cfg, stages=["ingest"])
    print(f"ingest: wrote {RunPaths(cfg.out_dir).corpus}")
    return 0


def _cmd_synth(args) -> int:
    cfg = _build_config(args)
    if args.out:
        syn = generate_synthetic(cfg.synthetic, seed=cfg.seed)
        save_corpus(syn.corpus, args.out)
        sidecar = Path(args.out).with_suffix(Path(args.out).suffix + ".planted.json")
        sidecar.write_text(json.dumps({
            "seed": cfg.seed,
            "planted": [{"pair": list(x.pair), "first_year": x.first_year}
                        for x in syn.planted],
            "established": [list(e) for e in syn.established],
        }, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        print(f"synth: {len(syn.corpus)} patents -> {args.out}")
        return 0
    run_pipeline(cfg, stages=["synth"])
    print(f"synth: wrote {RunPaths(cfg.out_dir).corpus}")
    return 0


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    if args.corpus:
        src = Path(args.corpus)
        if not src.exists():
            raise ConfigError(f"corpus path not found: {src}")
        out = args.out or "model.ckpt"
        corpus = load_corpus(src)
        tok = build_tokenizer(corpus, min_freq=cfg.min_freq)
        mconfig = cfg.model_config(tok.vocab_size)
        tr, _, _ = year_ordered_split(corpus, cfg.split_fracs)
        seqs, skipped = [], 0
        for rec in tr:
            try:
                seqs.append(encode_patent(tok, rec, mconfig.max_seq_len))
            except TooManyCodes:
                skipped += 1
        params, losses = train(seqs, mconfig, cfg.train)
        save_checkpoint(out, params, mconfig, tok)
        note = f", skipped {skipped}" if skipped else ""
        print(f"train: {len(seqs)} sequences{note}, "
              f"final loss {losses[-1]:.4f} -> {out}")
        return 0
    run_pipeline(cfg, stages=["train"])
    p = RunPaths(cfg.out_dir)
    print(f"train: wrote {p.checkpoint}")
    return 0


def _cmd_embed(args) -> int:
    cfg = _build_config(args)
    if args.ckpt and args.out:
        if not Path(args.ckpt).exists():
            raise ConfigError(f"checkpoint not found: {args.ckpt}")
        corpus_path = args.corpus or str(RunPaths(cfg.out_dir).corpus)
        if not Path(corpus_path).exists():
            raise ConfigError(f"corpus path not found: {corpus_path}")
        params, mconfig, tok = load_checkpoint(args.ckpt)
        corpus = load_corpus(corpus_path)
        window = TimeWindow.parse(args.window) if args.window else None
        store = extract_embeddings(params, mconfig, tok, corpus, window=window,
                                   batch_size=cfg.embed_batch)
        store.save(args.out)
        print(f"embed: {store.tech_ids.size} tech rows, "
              f"{store.cls_ids.size} cls rows -> {args.out}")
        return 0
    run_pipeline(cfg, stages=["embed"])
    p = RunPaths(cfg.out_dir)
    print(f"embed: wrote {p.store} and {p.train_store}")
    return 0


def _cmd_cs(args) -> int:
    cfg = _build_config(args)
    if args.store_dir:
        store_dir = Path(args.store_dir)
        if not store_dir.is_dir():
            raise ConfigError(f"store dir not found: {args.store_dir}")
        files = sorted(store_dir.glob("*.store"))
        if not files:
            raise EmptyStore(f"no .store files under {args.store_dir}")
        store = merge_stores([EmbeddingStore.load(f) for f in files])
        if not args.pairs:
            raise ConfigError("cs with --store-dir needs --pairs")
        if args.pairs == "all-candidates":
            codes = store.codes()
            pairs = [(a, b) for i, a in enumerate(codes) for b in codes[i + 1:]]
        else:
            pairs = _read_pairs_file(args.pairs)
        years = sorted(set(store.tech_years.tolist()))
        rows = []
        for a, b in pairs:
            series = cs_timeseries(store, a, b, cfg.cs, years)
            for y, v, n in zip(years, series.smoothed, series.n_pairs_used):
                rows.append((a, b, y, _fmt(v), n, cfg.cs.method))
        out = args.out or "cs_series.csv"
        _write_csv(out, ["code_a", "code_b", "year", "cs", "n_pairs_used",
                         "method"], rows)
        print(f"cs: {len(pairs)} pairs x {len(years)} years -> {out}")
        return 0
    run_pipeline(cfg, stages=["cs"])
    print(f"cs: wrote {RunPaths(cfg.out_dir).cs_series}")
    return 0


def _cmd_score(args) -> int:
    cfg = _build_config(args)
    run_pipeline(cfg, stages=["score"])
    p = RunPaths(cfg.out_dir)
    outs = [p.pair_stats(w) for w in cfg.backtest.test_windows]
    print("score: wrote " + ", ".join(str(x) for x in outs))
    return 0


def _cmd_backtest(args) -> int:
    cfg = _build_config(args)
    run_pipeline(cfg, stages=["backtest"])
    p = RunPaths(cfg.out_dir)
    d = json.loads(p.backtest.read_text(encoding="utf-8"))
    for w in d["windows"]:
        flag = " (degenerate)" if w["degenerate"] else ""
        print(f"backtest {w['window']}: auc {w['auc']:.3f}, "
              f"K {w['K']}{flag}")
    print(f"backtest: wrote {p.backtest}")
    return 0


def _cmd_tasks(args) -> int:
    cfg = _build_config(args)
    if args.ckpt and args.store:
        for path, what in ((args.ckpt, "checkpoint"), (args.store, "store")):
            if not Path(path).exists():
                raise ConfigError(f"{what} not found: {path}")
        corpus_path = args.corpus or str(RunPaths(cfg.out_dir).corpus)
        if not Path(corpus_path).exists():
            raise ConfigError(f"corpus path not found: {corpus_path}")
        params, mconfig, tok = load_checkpoint(args.ckpt)
        store = EmbeddingStore.load(args.store)
        corpus = load_corpus(corpus_path)
        tr, va, te = year_ordered_split(corpus, cfg.split_fracs)
        out = {}
        which = args.task or list(cfg.tasks.which)
        if "ipc" in which:
            out["ipc"] = ipc_eval(params, mconfig, tok, va, te,
                                  grid=cfg.tasks.threshold_grid)
            out["ipc_knn"] = knn_ipc_eval(store, tr, te, k=cfg.tasks.knn_k)
        if "cite" in which:
            out["cite"] = citation_eval(store, te,
                                        n_distractors=cfg.tasks.cite_pool,
                                        seed=cfg.seed)
        if "title" in which:
            out["title"] = title_abstract_eval(params, mconfig, tok, te)
        text = json.dumps(out, sort_keys=True, indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
            print(f"tasks: wrote {args.out}")
        else:
            print(text)
        return 0
    run_pipeline(cfg, stages=["tasks"])
    print(f"tasks: wrote {RunPaths(cfg.out_dir).tasks}")
    return 0


def _cmd_report(args) -> int:
    cfg = _build_config(args)
    run_pipeline(cfg, stages=["report"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="forge",
        description="Patent corpus modeling: train a masked encoder, score "
                    "code-pair convergence, backtest innovation forecasts.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--out-dir", help="pipeline output directory")
        p.add_argument("--seed", type=int, help="global random seed")

    p = sub.add_parser("ingest", help="parse and canonicalize a corpus file")
    common(p)
    p.add_argument("--input", help="raw corpus JSON-lines path")
    p.add_argument("--output", help="write canonical corpus here (direct mode)")
    p.add_argument("--min-year", type=int, help="drop records before this year")
    p.add_argument("--max-year", type=int, help="drop records after this year")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--spec", help="synthetic spec JSON path")
    p.add_argument("--out", help="write the corpus here (direct mode)")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train the masked-token encoder")
    common(p)
    p.add_argument("--corpus", help="corpus path (direct mode)")
    p.add_argument("--out", help="checkpoint output path (direct mode)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("embed", help="extract code and CLS embeddings")
    common(p)
    p.add_argument("--ckpt", help="checkpoint path (direct mode)")
    p.add_argument("--corpus", help="corpus path (direct mode)")
    p.add_argument("--window", help="publication-year window Y1:Y2")
    p.add_argument("--out", help="store output path (direct mode)")
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("cs", help="context-similarity series for code pairs")
    common(p)
    p.add_argument("--store-dir", help="directory of .store files (direct mode)")
    p.add_argument("--pairs",
                   help="pairs file (one 'A,B' per line) or 'all-candidates'")
    p.add_argument("--method", choices=CS_METHODS, help="similarity variant")
    p.add_argument("--x", type=float, help="top fraction for topx_tech")
    p.add_argument("--smooth", type=int, help="centered smoothing window (odd)")
    p.add_argument("--out", help="CSV output path (direct mode)")
    p.set_defaults(fn=_cmd_cs)

    p = sub.add_parser("score", help="null-model pair statistics for a test window")
    common(p)
    p.add_argument("--train-window", help="training years Y1:Y2")
    p.add_argument("--test-window", help="evaluation years Y3:Y4")
    p.add_argument("--ci", type=float, help="target class imbalance")
    p.add_argument("--min-support", type=int, help="per-code support floor")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("backtest", help="score candidates and measure forecast AUC")
    common(p)
    p.set_defaults(fn=_cmd_backtest)

    p = sub.add_parser("tasks", help="downstream evaluations of the encoder")
    common(p)
    p.add_argument("--task", action="append", choices=("ipc", "cite", "title"),
                   help="which evaluation; repeatable (default: all)")
    p.add_argument("--ckpt", help="checkpoint path (direct mode)")
    p.add_argument("--store", help="embedding store path (direct mode)")
    p.add_argument("--corpus", help="corpus path (direct mode)")
    p.add_argument("--out", help="JSON output path (direct mode)")
    p.set_defaults(fn=_cmd_tasks)

    p = sub.add_parser("report", help="summarize results and emit plot data")
    common(p)
    p.set_defaults(fn=_cmd_report)

    return ap


def main(argv=None) -> int:
    try:
        _cap_threads()
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except _CONFIG_ERRORS as e:
        print(f"forge: config error: {e}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as e:
        print(f"forge: data error: {e}", file=sys.stderr)
        return 3
    except ForgeError as e:
        print(f"forge: {e}", file=sys.stderr)
        return 4
    except SystemExit as e:   # argparse --help / usage errors
        return int(e.code or 0)
    except KeyboardInterrupt:
        return 130
    except Exception as e:   # noqa: BLE001  anything else is a runtime failure
        print(f"forge: runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
