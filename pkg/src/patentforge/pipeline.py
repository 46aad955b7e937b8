"""Staged experiment pipeline with content-hashed manifests.

Every stage reads files, writes files, and records what it did in
``manifest_<stage>.json`` (input/output hashes, the effective config,
timings).  All artifact bytes are a pure function of the inputs and the
global seed; only the manifests' timing fields differ between reruns.
Stages skip themselves when their outputs already exist, so any entry
point can be invoked on a cold directory and pull in what it needs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .corpus import (
    Corpus,
    TimeWindow,
    load_corpus,
    save_corpus,
    window_slice,
    year_ordered_split,
)
from .errors import ConfigError, InsufficientCodes, MissingResults, TooManyCodes
from .evaluation.backtest import BacktestConfig, run_backtest
from .evaluation.synthetic import SyntheticSpec, generate_synthetic
from .evaluation.tasks import (
    THRESHOLD_GRID,
    citation_eval,
    ipc_eval,
    knn_ipc_eval,
    title_abstract_eval,
)
from .model import (
    ModelConfig,
    TrainConfig,
    build_tokenizer,
    encode_patent,
    extract_embeddings,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .model.embeddings import EmbeddingStore
from .nullmodel import (
    LinkProbabilities,
    candidate_pairs,
    canonical_pair,
    pair_stats_table,
    poisson_binomial_pvalues_batch,
)
from .similarity import CSConfig, cs_timeseries, random_pair_baseline

SCHEMA_VERSION = 1

_MODEL_FIELDS = ("layers", "heads", "model_dim", "ff_dim", "max_seq_len")
_TRAIN_FIELDS = ("lr", "steps", "batch_size", "mask_prob", "warmup_frac", "seed")


@dataclass(frozen=True)
class TaskConfig:
    which: tuple = ("ipc", "cite", "title")
    cite_pool: int = 20
    knn_k: int = 5
    threshold_grid: tuple = THRESHOLD_GRID

    def __post_init__(self):
        bad = set(self.which) - {"ipc", "cite", "title"}
        if bad:
            raise ConfigError(f"unknown tasks: {sorted(bad)}")
        if self.cite_pool < 1 or self.knn_k < 1:
            raise ConfigError("cite_pool and knn_k must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """One declarative document driving the whole pipeline.

    The global seed feeds every stochastic component (synthesis, init,
    batching, distractor draws, permutations) unless a section pins its
    own.
    """

    out_dir: str = "forge_run"
    seed: int = 0
    corpus_path: str | None = None     # external input; None means synthesize
    min_year: int | None = None
    max_year: int | None = None
    min_freq: int = 2
    split_fracs: tuple = (0.8, 0.1, 0.1)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    model: dict = field(default_factory=dict)   # ModelConfig overrides
    train: TrainConfig = field(default_factory=TrainConfig)
    embed_window: TimeWindow | None = None
    embed_batch: int = 64
    cs: CSConfig = field(default_factory=CSConfig)
    cs_pairs: object = "auto"          # "auto" | "planted" | "all-candidates" | pair list
    band_samples: int = 200
    backtest: BacktestConfig = None
    tasks: TaskConfig = field(default_factory=TaskConfig)

    def __post_init__(self):
        if self.backtest is None:
            object.__setattr__(
                self,
                "backtest",
                BacktestConfig(
                    train_window=TimeWindow(2000, 2005),
                    test_windows=(TimeWindow(2006, 2010), TimeWindow(2007, 2011)),
                    cs=self.cs,
                    seed=self.seed,
                ),
            )
        bad = set(self.model) - set(_MODEL_FIELDS)
        if bad:
            raise ConfigError(f"unknown model fields: {sorted(bad)}")
        if isinstance(self.cs_pairs, str):
            if self.cs_pairs not in ("auto", "planted", "all-candidates"):
                raise ConfigError(f"cs_pairs: {self.cs_pairs!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        kw = dict(d)
        seed = int(kw.get("seed", 0))
        if "split_fracs" in kw:
            kw["split_fracs"] = tuple(kw["split_fracs"])
        if isinstance(kw.get("synthetic"), dict):
            syn = dict(kw["synthetic"])
            syn.pop("seed", None)     # the global seed drives synthesis
            kw["synthetic"] = SyntheticSpec.from_dict(syn)
        if isinstance(kw.get("train"), dict):
            t = dict(kw["train"])
            bad = set(t) - set(_TRAIN_FIELDS)
            if bad:
                raise ConfigError(f"unknown train fields: {sorted(bad)}")
            t.setdefault("seed", seed)
            kw["train"] = TrainConfig(**t)
        if isinstance(kw.get("embed_window"), str):
            kw["embed_window"] = TimeWindow.parse(kw["embed_window"])
        if isinstance(kw.get("cs"), dict):
            kw["cs"] = CSConfig(**kw["cs"])
        if isinstance(kw.get("tasks"), dict):
            t = dict(kw["tasks"])
            for name in ("which", "threshold_grid"):
                if name in t:
                    t[name] = tuple(t[name])
            kw["tasks"] = TaskConfig(**t)
        if isinstance(kw.get("backtest"), dict):
            b = dict(kw["backtest"])
            b["train_window"] = TimeWindow.parse(b["train_window"])
            b["test_windows"] = tuple(
                TimeWindow.parse(w) for w in b["test_windows"]
            )
            b.setdefault("seed", seed)
            cs = kw.get("cs")
            if "cs" in b:
                b["cs"] = CSConfig(**b["cs"])
            elif isinstance(cs, CSConfig):
                b["cs"] = cs
            kw["backtest"] = BacktestConfig(**b)
        if isinstance(kw.get("cs_pairs"), list):
            kw["cs_pairs"] = tuple(canonical_pair(*p) for p in kw["cs_pairs"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        bt = self.backtest
        return {
            "out_dir": self.out_dir,
            "seed": self.seed,
            "corpus_path": self.corpus_path,
            "min_year": self.min_year,
            "max_year": self.max_year,
            "min_freq": self.min_freq,
            "split_fracs": list(self.split_fracs),
            "synthetic": self.synthetic.to_dict(),
            "model": dict(self.model),
            "train": self.train.to_dict(),
            "embed_window": str(self.embed_window) if self.embed_window else None,
            "embed_batch": self.embed_batch,
            "cs": {
                "method": self.cs.method,
                "x_percent": self.cs.x_percent,
                "window_smoothing": self.cs.window_smoothing,
            },
            "cs_pairs": (
                [list(p) for p in self.cs_pairs]
                if isinstance(self.cs_pairs, tuple)
                else self.cs_pairs
            ),
            "band_samples": self.band_samples,
            "backtest": {
                "train_window": str(bt.train_window),
                "test_windows": [str(w) for w in bt.test_windows],
                "class_imbalance": bt.class_imbalance,
                "min_support": bt.min_support,
                "n_permutations": bt.n_permutations,
                "seed": bt.seed,
            },
            "tasks": {
                "which": list(self.tasks.which),
                "cite_pool": self.tasks.cite_pool,
                "knn_k": self.tasks.knn_k,
                "threshold_grid": list(self.tasks.threshold_grid),
            },
        }

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, seed=self.seed, **self.model)


class RunPaths:
    """File layout inside the output directory."""

    def __init__(self, out_dir):
        self.root = Path(out_dir)
        self.corpus = self.root / "corpus.jsonl"
        self.planted = self.root / "planted.json"
        self.checkpoint = self.root / "model.ckpt"
        self.losses = self.root / "losses.csv"
        self.split = self.root / "split.json"
        self.store = self.root / "embeddings.store"
        self.train_store = self.root / "train_embeddings.store"
        self.cs_series = self.root / "cs_series.csv"
        self.cs_band = self.root / "cs_band.csv"
        self.backtest = self.root / "backtest.json"
        self.tasks = self.root / "tasks.json"
        self.report_cs = self.root / "cs_vs_year.csv"
        self.report_auc = self.root / "auc_vs_window.csv"

    def pair_stats(self, window: TimeWindow) -> Path:
        return self.root / f"pair_stats_{window.start_year}-{window.end_year}.csv"

    def manifest(self, stage: str) -> Path:
        return self.root / f"manifest_{stage}.json"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _fmt(v) -> str:
    """Fixed float rendering for delimited files; None becomes 'nan'."""
    if v is None:
        return "nan"
    return f"{float(v):.12g}"


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv(path):
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    return header, [line.split(",") for line in text[1:]]


class StageRunner:
    """Shared bookkeeping: hash inputs, run, hash outputs, write manifest."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.paths = RunPaths(cfg.out_dir)
        self.paths.root.mkdir(parents=True, exist_ok=True)

    def run(self, stage, fn, inputs, outputs):
        t0 = time.time()
        started = datetime.now(timezone.utc).isoformat()
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "stage": stage,
            "config": self.cfg.to_dict(),
            "inputs": {p.name: _sha256(p) for p in inputs},
            "started": started,
        }
        try:
            extra = fn() or {}
        except BaseException as e:
            manifest["failed"] = repr(e)
            manifest["outputs"] = {
                p.name: _sha256(p) for p in outputs if p.exists()
            }
            manifest["seconds"] = round(time.time() - t0, 3)
            _write_json(self.paths.manifest(stage), manifest)
            raise
        manifest.update(extra)
        manifest["outputs"] = {p.name: _sha256(p) for p in outputs}
        manifest["seconds"] = round(time.time() - t0, 3)
        _write_json(self.paths.manifest(stage), manifest)
        return manifest


# ---------------------------------------------------------------- stages


def stage_synth(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths

    def work():
        syn = generate_synthetic(cfg.synthetic, seed=cfg.seed)
        save_corpus(syn.corpus, p.corpus)
        _write_json(
            p.planted,
            {
                "schema_version": SCHEMA_VERSION,
                "seed": cfg.seed,
                "spec": cfg.synthetic.to_dict(),
                "planted": [
                    {"pair": list(pp.pair), "first_year": pp.first_year}
                    for pp in syn.planted
                ],
                "established": [list(e) for e in syn.established],
            },
        )
        return {"n_patents": len(syn.corpus), "n_planted": len(syn.planted)}

    return r.run("synth", work, [], [p.corpus, p.planted])


def stage_ingest(cfg: ExperimentConfig) -> dict:
    if cfg.corpus_path is None:
        raise ConfigError("ingest needs corpus_path")
    src = Path(cfg.corpus_path)
    if not src.exists():
        raise ConfigError(f"corpus path not found: {src}")
    r = StageRunner(cfg)
    p = r.paths

    def work():
        corpus = load_corpus(src)
        n_raw = len(corpus)
        lo, hi = cfg.min_year, cfg.max_year
        if lo is not None or hi is not None:
            kept = [
                rec
                for rec in corpus
                if (lo is None or rec.pub_year >= lo)
                and (hi is None or rec.pub_year <= hi)
            ]
            corpus = Corpus.from_records(
                kept, duplicate_codes_removed=corpus.duplicate_codes_removed
            )
        save_corpus(corpus, p.corpus)
        return {
            "n_read": n_raw,
            "n_kept": len(corpus),
            "duplicate_codes_removed": corpus.duplicate_codes_removed,
        }

    return r.run("ingest", work, [src], [p.corpus])


def stage_train(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths

    def work():
        corpus = load_corpus(p.corpus)
        tok = build_tokenizer(corpus, min_freq=cfg.min_freq)
        mconfig = cfg.model_config(tok.vocab_size)
        tr, va, te = year_ordered_split(corpus, cfg.split_fracs)
        _write_json(
            p.split,
            {
                "schema_version": SCHEMA_VERSION,
                "fracs": list(cfg.split_fracs),
                "train": [x.id for x in tr],
                "val": [x.id for x in va],
                "test": [x.id for x in te],
            },
        )
        seqs, skipped = [], 0
        for rec in tr:
            try:
                seqs.append(encode_patent(tok, rec, mconfig.max_seq_len))
            except TooManyCodes:
                skipped += 1
        params, losses = train(seqs, mconfig, cfg.train)
        save_checkpoint(p.checkpoint, params, mconfig, tok)
        _write_csv(
            p.losses,
            ["step", "loss"],
            [(i, _fmt(v)) for i, v in enumerate(losses)],
        )
        return {
            "vocab_size": tok.vocab_size,
            "n_train": len(seqs),
            "skipped_too_many_codes": skipped,
            "final_loss": float(losses[-1]) if losses.size else None,
        }

    return r.run("train", work, [p.corpus], [p.checkpoint, p.losses, p.split])


def stage_embed(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths

    def work():
        params, mconfig, tok = load_checkpoint(p.checkpoint)
        corpus = load_corpus(p.corpus)
        full = extract_embeddings(
            params, mconfig, tok, corpus,
            window=cfg.embed_window, batch_size=cfg.embed_batch,
        )
        full.save(p.store)
        train_store = extract_embeddings(
            params, mconfig, tok, corpus,
            window=cfg.backtest.train_window, batch_size=cfg.embed_batch,
        )
        train_store.save(p.train_store)
        return {
            "n_tech_rows": int(full.tech_ids.size),
            "n_cls_rows": int(full.cls_ids.size),
            "n_train_tech_rows": int(train_store.tech_ids.size),
            "skipped_too_many_codes": full.n_skipped,
        }

    return r.run(
        "embed", work, [p.checkpoint, p.corpus], [p.store, p.train_store]
    )


def stage_score(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths
    bt = cfg.backtest
    outs = [p.pair_stats(w) for w in bt.test_windows]

    def work():
        corpus = load_corpus(p.corpus)
        cutoff = bt.train_window.end_year + 1
        cands = sorted(
            candidate_pairs(
                corpus, cutoff,
                min_support=bt.min_support, support_window=bt.train_window,
            )
        )
        for w in bt.test_windows:
            wslice = window_slice(corpus, w)
            probs = LinkProbabilities(wslice)
            stats = pair_stats_table(wslice, cands, probs)
            idx = probs.code_index
            known = [pair for pair in cands if pair in stats]
            pvals = {}
            if known:
                ja = np.array([idx[a] for a, _ in known])
                jb = np.array([idx[b] for _, b in known])
                Q = (probs.P[:, ja] * probs.P[:, jb]).T
                O = np.array([stats[pair].O for pair in known])
                pv = poisson_binomial_pvalues_batch(Q, O)
                pvals = {pair: float(v) for pair, v in zip(known, pv)}
            rows = []
            for pair in cands:
                st = stats.get(pair)
                if st is None:
                    # a code absent from the window co-occurs with nothing
                    rows.append((pair[0], pair[1], 0, _fmt(0.0), _fmt(0.0),
                                 "nan", _fmt(1.0)))
                else:
                    rows.append((
                        pair[0], pair[1], st.O, _fmt(st.E), _fmt(st.sigma),
                        _fmt(st.z), _fmt(pvals[pair]),
                    ))
            _write_csv(
                p.pair_stats(w),
                ["code_a", "code_b", "O", "E", "sigma", "z", "pvalue"],
                rows,
            )
        return {"n_candidates": len(cands)}

    return r.run("score", work, [p.corpus], outs)


def _resolve_cs_pairs(cfg: ExperimentConfig, p: RunPaths, corpus: Corpus):
    sel = cfg.cs_pairs
    if isinstance(sel, tuple):
        return [canonical_pair(*x) for x in sel]
    if sel == "auto":
        sel = "planted" if p.planted.exists() else "all-candidates"
    if sel == "planted":
        if not p.planted.exists():
            raise ConfigError("cs_pairs='planted' but no planted pairs on disk")
        d = json.loads(p.planted.read_text(encoding="utf-8"))
        return [canonical_pair(*x["pair"]) for x in d["planted"]]
    bt = cfg.backtest
    return sorted(
        candidate_pairs(
            corpus, bt.train_window.end_year + 1,
            min_support=bt.min_support, support_window=bt.train_window,
        )
    )


def stage_cs(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths
    inputs = [p.store, p.corpus] + ([p.planted] if p.planted.exists() else [])

    def work():
        store = EmbeddingStore.load(p.store)
        corpus = load_corpus(p.corpus)
        pairs = _resolve_cs_pairs(cfg, p, corpus)
        years = list(corpus.year_span().years())
        rows = []
        for a, b in pairs:
            series = cs_timeseries(store, a, b, cfg.cs, years)
            for y, v, n in zip(years, series.smoothed, series.n_pairs_used):
                rows.append((a, b, y, _fmt(v), n, cfg.cs.method))
        _write_csv(
            p.cs_series,
            ["code_a", "code_b", "year", "cs", "n_pairs_used", "method"],
            rows,
        )
        # baseline pool drops only the pairs known to carry signal, not
        # every scored candidate; excluding all candidates would leave
        # just co-occurring pairs and inflate the band
        exclude = set()
        if p.planted.exists():
            d = json.loads(p.planted.read_text(encoding="utf-8"))
            exclude.update(canonical_pair(*x["pair"]) for x in d["planted"])
        if isinstance(cfg.cs_pairs, tuple):
            exclude.update(canonical_pair(*x) for x in cfg.cs_pairs)
        band_rows = []
        for y in years:
            try:
                mean, std = random_pair_baseline(
                    store, cfg.cs, n_samples=cfg.band_samples,
                    seed=cfg.seed, years=(y,), exclude=tuple(sorted(exclude)),
                )
            except InsufficientCodes:
                band_rows.append((y, "nan", "nan", "nan", "nan"))
                continue
            band_rows.append(
                (y, _fmt(mean), _fmt(std),
                 _fmt(mean - 3 * std), _fmt(mean + 3 * std))
            )
        _write_csv(
            p.cs_band, ["year", "mean", "std", "lo", "hi"], band_rows
        )
        return {"n_pairs": len(pairs), "n_years": len(years)}

    return r.run("cs", work, inputs, [p.cs_series, p.cs_band])


def stage_backtest(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths

    def work():
        corpus = load_corpus(p.corpus)
        store = EmbeddingStore.load(p.train_store)
        res = run_backtest(corpus, store, cfg.backtest)
        windows = []
        for w in res.windows:
            perm = np.asarray(w.permutation_aucs, dtype=np.float64)
            windows.append({
                "window": str(w.window),
                "K": w.K,
                "z_threshold": w.z_threshold,
                "n_positives": len(w.positives),
                "auc": w.auc,
                "degenerate": w.degenerate,
                "perm_mean": float(perm.mean()) if perm.size else None,
                "perm_std": float(perm.std()) if perm.size else None,
                "perm_p95": w.permutation_p95,
            })
        _write_json(
            p.backtest,
            {
                "schema_version": SCHEMA_VERSION,
                "method": cfg.backtest.cs.method,
                "train_window": str(cfg.backtest.train_window),
                "n_candidates": len(res.candidates),
                "n_skipped": res.n_skipped,
                "windows": windows,
                "scores": {
                    f"{a}|{b}": s
                    for (a, b), s in zip(res.candidates, res.scores)
                },
            },
        )
        return {"n_candidates": len(res.candidates)}

    return r.run("backtest", work, [p.corpus, p.train_store], [p.backtest])


def stage_tasks(cfg: ExperimentConfig) -> dict:
    r = StageRunner(cfg)
    p = r.paths

    def work():
        params, mconfig, tok = load_checkpoint(p.checkpoint)
        corpus = load_corpus(p.corpus)
        store = EmbeddingStore.load(p.store)
        tr, va, te = year_ordered_split(corpus, cfg.split_fracs)
        out = {"schema_version": SCHEMA_VERSION, "n_test": len(te)}
        if "ipc" in cfg.tasks.which:
            out["ipc"] = ipc_eval(
                params, mconfig, tok, va, te, grid=cfg.tasks.threshold_grid
            )
            out["ipc_knn"] = knn_ipc_eval(
                store, tr, te, k=cfg.tasks.knn_k
            )
        if "cite" in cfg.tasks.which:
            out["cite"] = citation_eval(
                store, te, n_distractors=cfg.tasks.cite_pool, seed=cfg.seed
            )
        if "title" in cfg.tasks.which:
            out["title"] = title_abstract_eval(params, mconfig, tok, te)
        _write_json(p.tasks, out)
        return {"tasks": list(cfg.tasks.which)}

    return r.run(
        "tasks", work, [p.checkpoint, p.corpus, p.store], [p.tasks]
    )


def stage_report(cfg: ExperimentConfig, echo=print) -> dict:
    r = StageRunner(cfg)
    p = r.paths
    have_cs = p.cs_series.exists() and p.cs_band.exists()
    have_bt = p.backtest.exists()
    have_tasks = p.tasks.exists()
    if not (have_cs or have_bt or have_tasks):
        raise MissingResults(f"no result files under {p.root}")
    inputs = [
        x
        for x in (p.cs_series, p.cs_band, p.backtest, p.tasks)
        if x.exists()
    ]
    outputs = []
    if have_cs:
        outputs.append(p.report_cs)
    if have_bt:
        outputs.append(p.report_auc)

    def work():
        if have_cs:
            _, band_rows = _read_csv(p.cs_band)
            band = {row[0]: row for row in band_rows}
            _, cs_rows = _read_csv(p.cs_series)
            rows = []
            for a, b, y, v, n, method in cs_rows:
                brow = band.get(y)
                mean, lo, hi = (brow[1], brow[3], brow[4]) if brow else ("nan",) * 3
                rows.append((a, b, y, v, n, method, mean, lo, hi))
            _write_csv(
                p.report_cs,
                ["code_a", "code_b", "year", "cs", "n_pairs_used", "method",
                 "band_mean", "band_lo", "band_hi"],
                rows,
            )
            echo(f"\ncontext similarity by year ({len(rows)} rows)")
            echo(f"  {'pair':16s} {'year':>5s} {'cs':>9s} {'band_mean':>10s} {'band_hi':>9s}")
            for a, b, y, v, n, method, mean, lo, hi in rows:
                if v != "nan":
                    echo(f"  {a + '-' + b:16s} {y:>5s} {float(v):9.4f} "
                         f"{float(mean):10.4f} {float(hi):9.4f}")
        if have_bt:
            d = json.loads(p.backtest.read_text(encoding="utf-8"))
            rows = []
            for w in d["windows"]:
                mean, std = w["perm_mean"], w["perm_std"]
                lo = mean - 3 * std if mean is not None else None
                hi = mean + 3 * std if mean is not None else None
                rows.append((
                    w["window"], d["n_candidates"], w["K"], w["n_positives"],
                    _fmt(w["auc"]), _fmt(mean), _fmt(lo), _fmt(hi),
                    _fmt(w["perm_p95"]), int(w["degenerate"]),
                ))
            _write_csv(
                p.report_auc,
                ["window", "n_candidates", "K", "n_positives", "auc",
                 "band_mean", "band_lo", "band_hi", "perm_p95", "degenerate"],
                rows,
            )
            echo(f"\nbacktest ({d['method']}, train {d['train_window']}, "
                 f"{d['n_candidates']} candidates)")
            echo(f"  {'window':12s} {'K':>4s} {'auc':>7s} {'perm_p95':>9s} {'flag':>5s}")
            for row in rows:
                flag = "degen" if row[9] else ""
                echo(f"  {row[0]:12s} {row[2]:>4d} {float(row[4]):7.3f} "
                     f"{float(row[8]):9.3f} {flag:>5s}")
        if have_tasks:
            d = json.loads(p.tasks.read_text(encoding="utf-8"))
            echo(f"\ntask metrics (n_test={d.get('n_test')})")
            for task in ("ipc", "ipc_knn", "cite", "title"):
                if task not in d:
                    continue
                parts = ", ".join(
                    f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                    for k, v in sorted(d[task].items())
                )
                echo(f"  {task:8s} {parts}")
        echo("")
        return {}

    return r.run("report", work, inputs, outputs)


# ---------------------------------------------------------- orchestration

_STAGE_FNS = {
    "ingest": stage_ingest,
    "synth": stage_synth,
    "train": stage_train,
    "embed": stage_embed,
    "score": stage_score,
    "cs": stage_cs,
    "backtest": stage_backtest,
    "tasks": stage_tasks,
    "report": stage_report,
}

# immediate prerequisites; the corpus stage resolves per config
_STAGE_DEPS = {
    "ingest": (),
    "synth": (),
    "train": ("corpus",),
    "embed": ("corpus", "train"),
    "score": ("corpus",),
    "cs": ("corpus", "embed"),
    "backtest": ("corpus", "embed"),
    "tasks": ("corpus", "train", "embed"),
    "report": (),
}

PIPELINE_ORDER = (
    "corpus", "train", "embed", "score", "cs", "backtest", "tasks", "report"
)


def _outputs_of(stage: str, cfg: ExperimentConfig):
    p = RunPaths(cfg.out_dir)
    return {
        "ingest": [p.corpus],
        "synth": [p.corpus, p.planted],
        "train": [p.checkpoint, p.losses, p.split],
        "embed": [p.store, p.train_store],
        "score": [p.pair_stats(w) for w in cfg.backtest.test_windows],
        "cs": [p.cs_series, p.cs_band],
        "backtest": [p.backtest],
        "tasks": [p.tasks],
        "report": [],
    }[stage]


def _corpus_stage(cfg: ExperimentConfig) -> str:
    return "synth" if cfg.corpus_path is None else "ingest"


def stage_outputs_exist(stage: str, cfg: ExperimentConfig) -> bool:
    outs = _outputs_of(stage, cfg)
    return bool(outs) and all(x.exists() for x in outs)


def run_pipeline(cfg: ExperimentConfig, stages=None, force=True) -> dict:
    """Execute stages in dependency order; return manifests by stage.

    ``stages=None`` runs the whole chain.  With an explicit list, the
    named stages always run (when ``force``) and missing prerequisites
    are built on demand; prerequisites whose outputs exist are reused.
    """
    if stages is None:
        requested = list(PIPELINE_ORDER)
        force_set = set(requested)
    else:
        requested = list(stages)
        force_set = set(requested) if force else set()
    for s in requested:
        if s not in _STAGE_FNS and s != "corpus":
            raise ConfigError(f"unknown stage: {s}")

    plan, seen = [], set()

    def add(stage):
        name = _corpus_stage(cfg) if stage == "corpus" else stage
        if name in seen:
            return
        for dep in _STAGE_DEPS[name]:
            add(dep)
        seen.add(name)
        plan.append(name)

    for s in requested:
        add(s)

    manifests = {}
    for name in plan:
        wanted = name in force_set or (
            "corpus" in force_set and name in ("synth", "ingest")
        )
        if not wanted and stage_outputs_exist(name, cfg):
            continue
        manifests[name] = _STAGE_FNS[name](cfg)
    return manifests
