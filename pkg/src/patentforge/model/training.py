"""Masked-token pretraining: batching, corruption, Adam, gradient checks."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..errors import DivergenceDetected, NoMaskedPositions
from .config import (
    CLS_ID,
    MASK_ID,
    N_SPECIAL,
    PAD_ID,
    UNK_ID,
    ModelConfig,
    TrainConfig,
    init_params,
)
from .encoder import encoder_forward, mlm_logits, mlm_loss_and_grads, pad_batch


def maskable(ids, mask):
    """True at positions a corruption step may touch.

    Structural tokens (PAD/CLS/SEP/MASK) are off limits; UNK stands in
    for a content word, so it stays eligible, as do technology tokens.
    """
    return mask & ((ids == UNK_ID) | (ids >= N_SPECIAL))


def mask_batch(rng, ids, mask, mask_prob, vocab_size):
    """BERT-style corruption: select ~mask_prob of the eligible positions,
    replace 80% with [MASK], 10% with a random non-special id, keep 10%.

    Returns (corrupted_ids, rows, cols, targets).  Resamples once if the
    draw selects nothing, then gives up.
    """
    eligible = maskable(ids, mask)
    for _ in range(2):
        pick = eligible & (rng.random(ids.shape) < mask_prob)
        if pick.any():
            break
    else:
        raise NoMaskedPositions("no eligible position selected after resampling")
    rows, cols = np.nonzero(pick)
    targets = ids[rows, cols].copy()
    r = rng.random(rows.size)
    random_ids = rng.integers(N_SPECIAL, vocab_size, size=rows.size)
    new = np.where(r < 0.8, MASK_ID, np.where(r < 0.9, random_ids, targets))
    out = ids.copy()
    out[rows, cols] = new
    return out, rows, cols, targets


def train_val_test_split(items, seed, fracs=(0.8, 0.1, 0.1)):
    """Deterministic shuffle-and-cut split of a sequence."""
    if abs(sum(fracs) - 1.0) > 1e-9 or len(fracs) != 3:
        raise ValueError(f"fracs must be 3 values summing to 1, got {fracs}")
    idx = np.random.default_rng(seed).permutation(len(items))
    n1 = int(round(fracs[0] * len(items)))
    n2 = n1 + int(round(fracs[1] * len(items)))
    pick = lambda sl: [items[i] for i in sl]
    return pick(idx[:n1]), pick(idx[n1:n2]), pick(idx[n2:])


class Adam:
    """Adam with linear learning-rate warmup, in-place updates."""

    def __init__(self, params, tc: TrainConfig):
        self.tc = tc
        self.t = 0
        self.warmup = max(1, int(round(tc.warmup_frac * tc.steps)))
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def lr_at(self, t) -> float:
        return self.tc.lr * min(1.0, t / self.warmup)

    def step(self, params, grads):
        tc = self.tc
        self.t += 1
        lr = self.lr_at(self.t)
        c1 = 1.0 - tc.beta1 ** self.t
        c2 = 1.0 - tc.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= tc.beta1
            m += (1.0 - tc.beta1) * g
            v *= tc.beta2
            v += (1.0 - tc.beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + tc.adam_eps)


def _batches(rng, n, batch_size):
    """Endless stream of index batches, reshuffling each pass."""
    while True:
        order = rng.permutation(n)
        for i in range(0, n, batch_size):
            yield order[i : i + batch_size]


def train(seqs, mconfig: ModelConfig, tconfig: TrainConfig, callback=None):
    """Run masked-token pretraining over encoded sequences.

    Returns (params, losses) where losses[0] is the loss at the freshly
    initialised parameters.  Fully deterministic given the configs.
    """
    if not seqs:
        raise ValueError("no sequences to train on")
    params = init_params(mconfig)
    opt = Adam(params, tconfig)
    rng = np.random.default_rng(tconfig.seed)
    stream = _batches(rng, len(seqs), tconfig.batch_size)
    losses = []
    for step in range(tconfig.steps):
        batch = [seqs[i] for i in next(stream)]
        ids, mask = pad_batch([s.ids for s in batch])
        try:
            cids, rows, cols, targets = mask_batch(
                rng, ids, mask, tconfig.mask_prob, mconfig.vocab_size
            )
        except NoMaskedPositions:
            warnings.warn(f"step {step}: empty mask draw, batch skipped")
            continue
        loss, grads = mlm_loss_and_grads(params, mconfig, cids, mask, rows, cols, targets)
        if not math.isfinite(loss):
            raise DivergenceDetected(f"non-finite loss {loss} at step {step}")
        opt.step(params, grads)
        losses.append(loss)
        if callback is not None:
            callback(step, loss)
    return params, np.asarray(losses)


def masked_accuracy(params, mconfig: ModelConfig, seqs, mask_prob, seed, batch_size=32):
    """Fraction of corrupted positions recovered by argmax prediction."""
    rng = np.random.default_rng(seed)
    hit = 0
    total = 0
    for i in range(0, len(seqs), batch_size):
        chunk = seqs[i : i + batch_size]
        ids, mask = pad_batch([s.ids for s in chunk])
        try:
            cids, rows, cols, targets = mask_batch(
                rng, ids, mask, mask_prob, mconfig.vocab_size
            )
        except NoMaskedPositions:
            continue
        h, _ = encoder_forward(params, mconfig, cids, mask, want_cache=False)
        pred = mlm_logits(params, h[rows, cols]).argmax(axis=1)
        hit += int((pred == targets).sum())
        total += targets.size
    if total == 0:
        raise NoMaskedPositions("no positions scored")
    return hit / total


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------


def numeric_grad(f, params, name, index, eps=1e-5):
    """Central-difference d f / d params[name][index]."""
    p = params[name]
    orig = p[index]
    p[index] = orig + eps
    up = f(params)
    p[index] = orig - eps
    down = f(params)
    p[index] = orig
    return (up - down) / (2.0 * eps)


def grad_check(
    mconfig: ModelConfig,
    seed=0,
    n_samples=250,
    eps=1e-5,
    batch=None,
):
    """Max relative error between analytic and numeric gradients.

    Runs in float64 on a fixed random batch so the loss is a pure
    function of the parameters.  ``batch`` may supply
    (ids, mask, rows, cols, targets) directly.
    """
    rng = np.random.default_rng(seed)
    params = init_params(mconfig, dtype=np.float64)
    if batch is None:
        B, L = 3, 12
        ids = rng.integers(N_SPECIAL, mconfig.vocab_size, size=(B, L))
        ids[:, 0] = CLS_ID
        mask = np.ones((B, L), dtype=bool)
        mask[1, L - 3 :] = False
        mask[2, L - 6 :] = False
        ids[~mask] = PAD_ID
        cids, rows, cols, targets = mask_batch(rng, ids, mask, 0.3, mconfig.vocab_size)
    else:
        cids, mask, rows, cols, targets = batch
    _, grads = mlm_loss_and_grads(params, mconfig, cids, mask, rows, cols, targets)

    def loss_of(p):
        val, _ = mlm_loss_and_grads(p, mconfig, cids, mask, rows, cols, targets)
        return val

    names = sorted(params)
    worst = 0.0
    for _ in range(n_samples):
        name = names[rng.integers(len(names))]
        flat = rng.integers(params[name].size)
        index = np.unravel_index(flat, params[name].shape)
        num = numeric_grad(loss_of, params, name, index, eps)
        ana = grads[name][index]
        rel = abs(ana - num) / max(abs(ana) + abs(num), 1e-6)
        worst = max(worst, rel)
    return worst
