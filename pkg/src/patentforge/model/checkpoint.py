"""Binary checkpoint format: magic, JSON header, raw float32 tensors.

Layout:  b"TTK1" | u32 header length (little endian) | JSON header |
tensor bytes back to back in canonical parameter order, row major.
The header carries the model config, the full tokenizer tables and the
tensor manifest, so a checkpoint alone reconstructs the model exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..errors import CorruptCheckpoint
from .config import ModelConfig, param_order, param_shapes
from .tokenizer import Tokenizer

MAGIC = b"TTK1"


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, params, config: ModelConfig, tokenizer: Tokenizer):
    names = param_order(config)
    header = {
        "config": config.to_dict(),
        "tokenizer": tokenizer.to_dict(),
        "dtype": "float32",
        "tensors": [[n, list(params[n].shape)] for n in names],
    }
    blob = _canonical_json(header)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(params[n], dtype=np.float32).tobytes())


def load_checkpoint(path):
    """Returns (params, config, tokenizer); params are float32."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 8:
        raise CorruptCheckpoint(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise CorruptCheckpoint(f"{path}: header extends past end of file")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        tokenizer = Tokenizer.from_dict(header["tokenizer"])
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptCheckpoint(f"{path}: unreadable header ({e})") from e
    expected = param_shapes(config)
    params = {}
    off = 8 + hlen
    for entry in header["tensors"]:
        name, shape = entry[0], tuple(entry[1])
        if name not in expected or expected[name] != shape:
            raise CorruptCheckpoint(f"{path}: unexpected tensor {name} {shape}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if off + nbytes > len(raw):
            raise CorruptCheckpoint(f"{path}: tensor {name} extends past end of file")
        params[name] = (
            np.frombuffer(raw, dtype=np.float32, count=nbytes // 4, offset=off)
            .reshape(shape)
            .copy()
        )
        off += nbytes
    if off != len(raw):
        raise CorruptCheckpoint(f"{path}: {len(raw) - off} trailing bytes")
    missing = set(param_order(config)) - set(params)
    if missing:
        raise CorruptCheckpoint(f"{path}: missing tensors {sorted(missing)}")
    return params, config, tokenizer


def model_fingerprint(params, config: ModelConfig) -> str:
    """sha256 over config and tensor bytes; identifies a trained model."""
    h = hashlib.sha256()
    h.update(_canonical_json(config.to_dict()))
    for n in param_order(config):
        h.update(n.encode())
        h.update(np.ascontiguousarray(params[n], dtype=np.float32).tobytes())
    return h.hexdigest()
