"""Bidirectional transformer encoder, forward and backward, in numpy.

Post-layer-norm blocks, learned positional embeddings, tied output head.
Padding keys are excluded from attention with exact -inf masking: padded
positions get probability exactly zero, so hidden states at real
positions are independent of the padding amount up to float32 rounding
in the attention reductions (the contraction length changes with the
pad width, which reorders BLAS partial sums).  All ops run in the dtype
of the parameters, which lets the same code path serve float32 training
and float64 finite-difference checks.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .config import LN_EPS, ModelConfig, PAD_ID

# tanh approximation constants
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------


def layer_norm(x, g, b, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def layer_norm_backward(dy, cache):
    xhat, inv, g = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def gelu(x):
    u = _GELU_C * (x + _GELU_A * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(u))


def gelu_backward(dy, x):
    x2 = x * x
    u = _GELU_C * (x + _GELU_A * x * x2)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------


def _split_heads(x, heads):
    B, L, D = x.shape
    return x.reshape(B, L, heads, D // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, L, hd = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, H * hd)


def _attention_forward(x, mask, p, prefix, heads):
    """x (B,L,D), mask (B,L) bool with True at real tokens."""
    B, L, D = x.shape
    x2 = x.reshape(B * L, D)
    q = _split_heads((x2 @ p[prefix + ".wq"] + p[prefix + ".bq"]).reshape(B, L, D), heads)
    k = _split_heads((x2 @ p[prefix + ".wk"] + p[prefix + ".bk"]).reshape(B, L, D), heads)
    v = _split_heads((x2 @ p[prefix + ".wv"] + p[prefix + ".bv"]).reshape(B, L, D), heads)
    scale = 1.0 / math.sqrt(D // heads)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    scores = np.where(mask[:, None, None, :], scores, -np.inf)
    probs = softmax(scores, axis=-1)
    ctx = _merge_heads(probs @ v)
    out = (ctx.reshape(B * L, D) @ p[prefix + ".wo"] + p[prefix + ".bo"]).reshape(B, L, D)
    return out, (x, q, k, v, probs, ctx)


def _attention_backward(dout, cache, p, prefix, heads, grads):
    x, q, k, v, probs, ctx = cache
    B, L, D = x.shape
    scale = 1.0 / math.sqrt(D // heads)
    d2 = dout.reshape(B * L, D)
    grads[prefix + ".wo"] += ctx.reshape(B * L, D).T @ d2
    grads[prefix + ".bo"] += d2.sum(axis=0)
    dctx = _split_heads((d2 @ p[prefix + ".wo"].T).reshape(B, L, D), heads)
    dprobs = dctx @ v.transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ dctx
    # softmax backward is zero wherever probs is exactly zero, so the
    # -inf key mask needs no special handling here
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dq = (dscores @ k) * scale
    dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale
    dx = np.zeros_like(x)
    x2 = x.reshape(B * L, D)
    for name, dh in (("q", dq), ("k", dk), ("v", dv)):
        dh2 = _merge_heads(dh).reshape(B * L, D)
        grads[prefix + ".w" + name] += x2.T @ dh2
        grads[prefix + ".b" + name] += dh2.sum(axis=0)
        dx += (dh2 @ p[prefix + ".w" + name].T).reshape(B, L, D)
    return dx


# ---------------------------------------------------------------------------
# Encoder stack
# ---------------------------------------------------------------------------


def _check_batch(config: ModelConfig, ids, mask):
    if ids.ndim != 2:
        raise ShapeMismatch(f"ids must be 2-d, got shape {ids.shape}")
    if mask.shape != ids.shape:
        raise ShapeMismatch(f"mask shape {mask.shape} != ids shape {ids.shape}")
    if ids.shape[1] > config.max_seq_len:
        raise ShapeMismatch(
            f"sequence length {ids.shape[1]} exceeds max_seq_len {config.max_seq_len}"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise ShapeMismatch("token id outside vocabulary")
    if ids.size and not mask.any(axis=1).all():
        raise ShapeMismatch("every row needs at least one real token")


def encoder_forward(params, config: ModelConfig, ids, mask, want_cache=True):
    """Hidden states for a padded batch.

    ids (B,L) int, mask (B,L) bool (True = real token).  Returns
    (h, caches) where h is (B,L,D) in the parameter dtype; caches is None
    when want_cache is False.
    """
    _check_batch(config, ids, mask)
    B, L = ids.shape
    emb = params["tok_emb"][ids] + params["pos_emb"][:L]
    h, emb_cache = layer_norm(emb, params["emb_ln.g"], params["emb_ln.b"])
    layer_caches = []
    for i in range(config.layers):
        p = f"l{i}"
        attn_out, attn_cache = _attention_forward(h, mask, params, p + ".attn", config.heads)
        res1 = h + attn_out
        h1, ln1_cache = layer_norm(res1, params[p + ".ln1.g"], params[p + ".ln1.b"])
        z = h1.reshape(B * L, -1) @ params[p + ".ff.w1"] + params[p + ".ff.b1"]
        a = gelu(z)
        ff_out = (a @ params[p + ".ff.w2"] + params[p + ".ff.b2"]).reshape(h1.shape)
        res2 = h1 + ff_out
        h, ln2_cache = layer_norm(res2, params[p + ".ln2.g"], params[p + ".ln2.b"])
        if want_cache:
            layer_caches.append((attn_cache, ln1_cache, h1, z, a, ln2_cache))
    caches = (ids, emb_cache, layer_caches) if want_cache else None
    return h, caches


def _scatter_rows(dest, idx, vals):
    """dest[idx] += vals with repeated indices, via sort + reduceat."""
    if idx.size == 0:
        return
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    svals = vals[order]
    starts = np.flatnonzero(np.r_[True, sidx[1:] != sidx[:-1]])
    dest[sidx[starts]] += np.add.reduceat(svals, starts, axis=0)


def encoder_backward(params, config: ModelConfig, caches, dh, grads=None):
    """Gradient of a scalar loss wrt all parameters given dL/dh.

    Accumulates into ``grads`` (allocated if None) and returns it.
    """
    ids, emb_cache, layer_caches = caches
    B, L = ids.shape
    if grads is None:
        grads = {k: np.zeros_like(v) for k, v in params.items()}
    for i in range(config.layers - 1, -1, -1):
        p = f"l{i}"
        attn_cache, ln1_cache, h1, z, a, ln2_cache = layer_caches[i]
        dres2, dg2, db2 = layer_norm_backward(dh, ln2_cache)
        grads[p + ".ln2.g"] += dg2
        grads[p + ".ln2.b"] += db2
        dff2 = dres2.reshape(B * L, -1)
        grads[p + ".ff.w2"] += a.T @ dff2
        grads[p + ".ff.b2"] += dff2.sum(axis=0)
        da = dff2 @ params[p + ".ff.w2"].T
        dz = gelu_backward(da, z)
        h1_2 = h1.reshape(B * L, -1)
        grads[p + ".ff.w1"] += h1_2.T @ dz
        grads[p + ".ff.b1"] += dz.sum(axis=0)
        dh1 = dres2 + (dz @ params[p + ".ff.w1"].T).reshape(dh.shape)
        dres1, dg1, db1 = layer_norm_backward(dh1, ln1_cache)
        grads[p + ".ln1.g"] += dg1
        grads[p + ".ln1.b"] += db1
        dh = dres1 + _attention_backward(dres1, attn_cache, params, p + ".attn", config.heads, grads)
    demb, dge, dbe = layer_norm_backward(dh, emb_cache)
    grads["emb_ln.g"] += dge
    grads["emb_ln.b"] += dbe
    grads["pos_emb"][:L] += demb.sum(axis=0)
    _scatter_rows(grads["tok_emb"], ids.ravel(), demb.reshape(B * L, -1))
    return grads


# ---------------------------------------------------------------------------
# Tied MLM head and loss
# ---------------------------------------------------------------------------


def mlm_logits(params, h_sel):
    """Vocabulary logits for selected hidden rows (M,D) -> (M,V)."""
    return h_sel @ params["tok_emb"].T + params["mlm_bias"]


def mlm_loss_and_grads(params, config: ModelConfig, ids, mask, rows, cols, targets):
    """Mean cross-entropy at masked positions plus full parameter grads.

    rows/cols index the positions whose original ids are in ``targets``.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    targets = np.asarray(targets)
    if not (rows.shape == cols.shape == targets.shape) or rows.ndim != 1:
        raise ShapeMismatch("rows, cols and targets must be equal-length 1-d")
    if rows.size == 0:
        raise ShapeMismatch("no positions to score")
    h, caches = encoder_forward(params, config, ids, mask)
    M = rows.size
    h_sel = h[rows, cols]
    logits = mlm_logits(params, h_sel)
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    loss = float((lse - logits[np.arange(M), targets]).mean())

    dlogits = softmax(logits, axis=1)
    dlogits[np.arange(M), targets] -= 1.0
    dlogits /= M
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["mlm_bias"] += dlogits.sum(axis=0)
    grads["tok_emb"] += dlogits.T @ h_sel
    dh_sel = dlogits @ params["tok_emb"]
    dh = np.zeros_like(h)
    dh[rows, cols] = dh_sel
    encoder_backward(params, config, caches, dh, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# Single-sequence convenience
# ---------------------------------------------------------------------------


def forward(params, config: ModelConfig, token_ids):
    """Hidden states and vocabulary logits for one unpadded sequence.

    Returns (h, logits) with shapes (L, D) and (L, V).
    """
    ids = np.asarray(token_ids, dtype=np.int64)[None, :]
    mask = np.ones_like(ids, dtype=bool)
    h, _ = encoder_forward(params, config, ids, mask, want_cache=False)
    h = h[0]
    return h, mlm_logits(params, h)


def pad_batch(seqs, pad_to=None):
    """Stack variable-length id sequences into (ids, mask) arrays."""
    lengths = [len(s) for s in seqs]
    L = max(lengths) if pad_to is None else pad_to
    ids = np.full((len(seqs), L), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), L), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : lengths[i]] = s
        mask[i, : lengths[i]] = True
    return ids, mask
