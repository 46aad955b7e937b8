"""Encoder architecture/training configuration and parameter initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

# Reserved ids; word ids follow, then technology-code ids.
PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SEP_ID = 3
MASK_ID = 4
N_SPECIAL = 5

SPECIAL_TOKENS = {
    "[PAD]": PAD_ID,
    "[UNK]": UNK_ID,
    "[CLS]": CLS_ID,
    "[SEP]": SEP_ID,
    "[MASK]": MASK_ID,
}

INIT_STD = 0.02
LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the bidirectional encoder.

    Defaults are desk scale: small enough to train on a CPU in minutes
    while exercising every mechanism of the full-size counterpart.
    """

    vocab_size: int
    layers: int = 4
    heads: int = 4
    model_dim: int = 128
    ff_dim: int = 512
    max_seq_len: int = 128
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "layers", "heads", "model_dim", "ff_dim",
                     "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.model_dim % self.heads != 0:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if self.vocab_size <= N_SPECIAL:
            raise ConfigError("vocab_size must exceed the special-token count")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "layers": self.layers,
            "heads": self.heads,
            "model_dim": self.model_dim,
            "ff_dim": self.ff_dim,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    """Masked-language-model training hyperparameters."""

    lr: float = 3e-4
    steps: int = 2000
    batch_size: int = 16
    mask_prob: float = 0.15
    seed: int = 0
    warmup_frac: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.mask_prob < 1.0:
            raise ConfigError("mask_prob must be in (0, 1)")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.lr <= 0.0:
            raise ConfigError("lr must be positive")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "steps": self.steps,
            "batch_size": self.batch_size,
            "mask_prob": self.mask_prob,
            "seed": self.seed,
            "warmup_frac": self.warmup_frac,
        }


def param_order(config: ModelConfig) -> list:
    """Canonical tensor order: this is also the checkpoint layout."""
    names = ["tok_emb", "pos_emb", "emb_ln.g", "emb_ln.b"]
    for i in range(config.layers):
        p = f"l{i}"
        names += [
            f"{p}.attn.wq", f"{p}.attn.bq",
            f"{p}.attn.wk", f"{p}.attn.bk",
            f"{p}.attn.wv", f"{p}.attn.bv",
            f"{p}.attn.wo", f"{p}.attn.bo",
            f"{p}.ln1.g", f"{p}.ln1.b",
            f"{p}.ff.w1", f"{p}.ff.b1",
            f"{p}.ff.w2", f"{p}.ff.b2",
            f"{p}.ln2.g", f"{p}.ln2.b",
        ]
    names.append("mlm_bias")
    return names


def param_shapes(config: ModelConfig) -> dict:
    D, F, V = config.model_dim, config.ff_dim, config.vocab_size
    shapes = {
        "tok_emb": (V, D),
        "pos_emb": (config.max_seq_len, D),
        "emb_ln.g": (D,),
        "emb_ln.b": (D,),
        "mlm_bias": (V,),
    }
    for i in range(config.layers):
        p = f"l{i}"
        shapes.update({
            f"{p}.attn.wq": (D, D), f"{p}.attn.bq": (D,),
            f"{p}.attn.wk": (D, D), f"{p}.attn.bk": (D,),
            f"{p}.attn.wv": (D, D), f"{p}.attn.bv": (D,),
            f"{p}.attn.wo": (D, D), f"{p}.attn.bo": (D,),
            f"{p}.ln1.g": (D,), f"{p}.ln1.b": (D,),
            f"{p}.ff.w1": (D, F), f"{p}.ff.b1": (F,),
            f"{p}.ff.w2": (F, D), f"{p}.ff.b2": (D,),
            f"{p}.ln2.g": (D,), f"{p}.ln2.b": (D,),
        })
    return shapes


def init_params(config: ModelConfig, dtype=np.float32) -> dict:
    """Fresh parameters, deterministic in ``config.seed``.

    Weight matrices and embeddings draw from N(0, 0.02); biases start at
    zero and layer-norm scales at one.  The MLM head reuses the token
    embedding matrix (tied weights), so only its bias appears here.
    """
    rng = np.random.default_rng(config.seed)
    shapes = param_shapes(config)
    params = {}
    for name in param_order(config):
        shape = shapes[name]
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            params[name] = np.ones(shape, dtype=dtype)
        elif leaf.startswith("b") or name == "mlm_bias":
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            params[name] = rng.normal(0.0, INIT_STD, size=shape).astype(dtype)
    return params


def cast_params(params: dict, dtype) -> dict:
    return {k: np.asarray(v, dtype=dtype) for k, v in params.items()}
