"""Sequence encoders producing the fixed-dimension vectors used for ranking.

Two kinds share one contract: a bag-of-embeddings baseline (mean of non-PAD
token embeddings) and a small pre-layer-norm transformer with multi-head
self-attention, GELU feedforward blocks, and mean pooling over non-PAD
positions. Both run in float64 with hand-derived analytic gradients so the
whole training path is finite-difference checkable.

Shapes: batch B, sequence length T, model dim d, heads H with head dim
d/H. PAD positions are excluded from attention keys (exact -inf masking)
and from pooling, which makes the output provably independent of padding
content.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

from . import tensorio
from .text import DEFAULT_MAX_LEN, TokenSequence

_LN_EPS = 1e-5
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class EncoderKind(str, enum.Enum):
    BAG_OF_EMBEDDINGS = "bag_of_embeddings"
    TRANSFORMER = "transformer"


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    kind: EncoderKind
    vocab_size: int
    model_dim: int = 64
    layers: int = 2
    heads: int = 2
    feedforward_dim: int = 128
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        for name in ("vocab_size", "model_dim", "layers", "heads", "feedforward_dim", "max_len"):
            if getattr(self, name) < 1:
                raise EncoderError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.model_dim % self.heads != 0:
            raise EncoderError(
                f"model_dim {self.model_dim} is not divisible by heads {self.heads}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "vocab_size": self.vocab_size,
            "model_dim": self.model_dim,
            "layers": self.layers,
            "heads": self.heads,
            "feedforward_dim": self.feedforward_dim,
            "max_len": self.max_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        return cls(**data)


@dataclass
class EncoderParams:
    config: EncoderConfig
    tensors: dict[str, np.ndarray]

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k != "pos"}


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    """Fixed sin/cos positional table, interleaved by feature pair."""
    table = np.zeros((max_len, dim), dtype=np.float64)
    position = np.arange(max_len, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-math.log(10000.0) / dim))
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div[: table[:, 1::2].shape[1]])
    return table


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    scale = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-scale, scale, size=shape)


def init_params(config: EncoderConfig) -> EncoderParams:
    """Seeded init: symmetric uniform with scale 1/sqrt(fan_in), layer-norm
    gains one, every bias zero, positional table fixed."""
    rng = np.random.default_rng(config.seed)
    d, ff = config.model_dim, config.feedforward_dim
    tensors: dict[str, np.ndarray] = {
        "embed": _uniform(rng, (config.vocab_size, d), d),
    }
    if config.kind is EncoderKind.TRANSFORMER:
        tensors["pos"] = sinusoidal_positions(config.max_len, d)
        for layer in range(config.layers):
            p = f"l{layer}"
            tensors[f"{p}.ln1.g"] = np.ones(d)
            tensors[f"{p}.ln1.b"] = np.zeros(d)
            for name in ("wq", "wk", "wv", "wo"):
                tensors[f"{p}.attn.{name}"] = _uniform(rng, (d, d), d)
            tensors[f"{p}.ln2.g"] = np.ones(d)
            tensors[f"{p}.ln2.b"] = np.zeros(d)
            tensors[f"{p}.ff.w1"] = _uniform(rng, (d, ff), d)
            tensors[f"{p}.ff.b1"] = np.zeros(ff)
            tensors[f"{p}.ff.w2"] = _uniform(rng, (ff, d), ff)
            tensors[f"{p}.ff.b2"] = np.zeros(d)
    return EncoderParams(config=config, tensors=tensors)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT2PI * np.exp(-0.5 * x * x)


def _layernorm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return gain * xhat + bias, (xhat, inv)


def _layernorm_backward(dy: np.ndarray, gain: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv = cache
    dgain = (dy * xhat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    dxhat = dy * gain
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgain, dbias


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _check_batch(params: EncoderParams, ids: np.ndarray, lengths: np.ndarray) -> None:
    if ids.ndim != 2:
        raise EncoderError(f"ids must be a (batch, time) matrix, got shape {ids.shape}")
    if np.any(lengths < 1):
        raise EncoderError("cannot encode an all-PAD sequence")
    if np.any(lengths > ids.shape[1]):
        raise EncoderError("true length exceeds sequence length")
    if np.any(ids >= params.config.vocab_size) or np.any(ids < 0):
        raise EncoderError("token id out of range for the configured vocabulary")
    if params.config.kind is EncoderKind.TRANSFORMER and ids.shape[1] > params.config.max_len:
        raise EncoderError(f"sequence length {ids.shape[1]} exceeds max_len {params.config.max_len}")


def forward_batch(params: EncoderParams, ids: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, dict]:
    """Encode a batch of padded id rows; returns (B, d) vectors and the
    cache needed by `backward_batch`."""
    _check_batch(params, ids, lengths)
    cfg = params.config
    t = params.tensors
    b_size, seq_len = ids.shape
    mask = (np.arange(seq_len)[None, :] < lengths[:, None]).astype(np.float64)

    if cfg.kind is EncoderKind.BAG_OF_EMBEDDINGS:
        emb = t["embed"][ids]
        pooled = (emb * mask[:, :, None]).sum(axis=1) / lengths[:, None]
        return pooled, {"ids": ids, "mask": mask, "lengths": lengths}

    x = t["embed"][ids] + t["pos"][:seq_len]
    key_mask = mask[:, None, None, :] > 0  # (B,1,1,T), broadcast over heads/queries
    scale = 1.0 / math.sqrt(cfg.model_dim // cfg.heads)
    layer_caches = []
    for layer in range(cfg.layers):
        p = f"l{layer}"
        n1, ln1_cache = _layernorm(x, t[f"{p}.ln1.g"], t[f"{p}.ln1.b"])
        q = _split_heads(n1 @ t[f"{p}.attn.wq"], cfg.heads)
        k = _split_heads(n1 @ t[f"{p}.attn.wk"], cfg.heads)
        v = _split_heads(n1 @ t[f"{p}.attn.wv"], cfg.heads)
        scores = np.where(key_mask, (q @ k.swapaxes(-1, -2)) * scale, -np.inf)
        scores -= scores.max(axis=-1, keepdims=True)
        exps = np.exp(scores)
        attn = exps / exps.sum(axis=-1, keepdims=True)
        o = _merge_heads(attn @ v)
        attn_out = o @ t[f"{p}.attn.wo"]
        xa = x + attn_out
        n2, ln2_cache = _layernorm(xa, t[f"{p}.ln2.g"], t[f"{p}.ln2.b"])
        h1 = n2 @ t[f"{p}.ff.w1"] + t[f"{p}.ff.b1"]
        g = _gelu(h1)
        x = xa + g @ t[f"{p}.ff.w2"] + t[f"{p}.ff.b2"]
        layer_caches.append(
            {"ln1": ln1_cache, "n1": n1, "q": q, "k": k, "v": v,
             "attn": attn, "o": o, "ln2": ln2_cache, "n2": n2, "h1": h1, "g": g}
        )

    pooled = (x * mask[:, :, None]).sum(axis=1) / lengths[:, None]
    cache = {"ids": ids, "mask": mask, "lengths": lengths, "layers": layer_caches, "scale": scale}
    return pooled, cache


def backward_batch(params: EncoderParams, cache: dict, d_pooled: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the trainable tensors given upstream dL/dh."""
    cfg = params.config
    t = params.tensors
    ids, mask, lengths = cache["ids"], cache["mask"], cache["lengths"]
    grads = {name: np.zeros_like(arr) for name, arr in params.trainable().items()}

    dx = (d_pooled[:, None, :] / lengths[:, None, None]) * mask[:, :, None]

    if cfg.kind is EncoderKind.BAG_OF_EMBEDDINGS:
        np.add.at(grads["embed"], ids, dx)
        return grads

    scale = cache["scale"]
    for layer in reversed(range(cfg.layers)):
        p = f"l{layer}"
        lc = cache["layers"][layer]

        # feedforward block: x_out = xa + gelu(n2 @ w1 + b1) @ w2 + b2
        dg = dx @ t[f"{p}.ff.w2"].T
        grads[f"{p}.ff.w2"] += np.einsum("btf,btd->fd", lc["g"], dx)
        grads[f"{p}.ff.b2"] += dx.sum(axis=(0, 1))
        dh1 = dg * _gelu_grad(lc["h1"])
        grads[f"{p}.ff.w1"] += np.einsum("btd,btf->df", lc["n2"], dh1)
        grads[f"{p}.ff.b1"] += dh1.sum(axis=(0, 1))
        dn2 = dh1 @ t[f"{p}.ff.w1"].T
        dxa_ln, dg2, db2 = _layernorm_backward(dn2, t[f"{p}.ln2.g"], lc["ln2"])
        grads[f"{p}.ln2.g"] += dg2
        grads[f"{p}.ln2.b"] += db2
        dxa = dx + dxa_ln

        # attention block: xa = x + merge(attn @ v) @ wo
        do_merged = dxa @ t[f"{p}.attn.wo"].T
        grads[f"{p}.attn.wo"] += np.einsum("btd,bte->de", lc["o"], dxa)
        do = _split_heads(do_merged, cfg.heads)
        dattn = do @ lc["v"].swapaxes(-1, -2)
        dv = lc["attn"].swapaxes(-1, -2) @ do
        dscores = lc["attn"] * (dattn - (dattn * lc["attn"]).sum(axis=-1, keepdims=True))
        dq = (dscores @ lc["k"]) * scale
        dk = (dscores.swapaxes(-1, -2) @ lc["q"]) * scale
        dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
        grads[f"{p}.attn.wq"] += np.einsum("btd,bte->de", lc["n1"], dq)
        grads[f"{p}.attn.wk"] += np.einsum("btd,bte->de", lc["n1"], dk)
        grads[f"{p}.attn.wv"] += np.einsum("btd,bte->de", lc["n1"], dv)
        dn1 = dq @ t[f"{p}.attn.wq"].T + dk @ t[f"{p}.attn.wk"].T + dv @ t[f"{p}.attn.wv"].T
        dx_ln, dg1, db1 = _layernorm_backward(dn1, t[f"{p}.ln1.g"], lc["ln1"])
        grads[f"{p}.ln1.g"] += dg1
        grads[f"{p}.ln1.b"] += db1
        dx = dxa + dx_ln

    np.add.at(grads["embed"], ids, dx)
    return grads


def encode(params: EncoderParams, seq: TokenSequence) -> np.ndarray:
    """Single-sequence convenience wrapper around `forward_batch`."""
    ids = np.asarray(seq.ids, dtype=np.int64)[None, :]
    lengths = np.array([seq.true_length], dtype=np.int64)
    pooled, _ = forward_batch(params, ids, lengths)
    return pooled[0]


def grad(params: EncoderParams, batch: list[tuple[TokenSequence, np.ndarray]]) -> dict[str, np.ndarray]:
    """Gradients of sum_i upstream_i . encode(seq_i), accumulated over the batch."""
    if not batch:
        raise EncoderError("gradient batch is empty")
    ids = np.stack([np.asarray(seq.ids, dtype=np.int64) for seq, _ in batch])
    lengths = np.array([seq.true_length for seq, _ in batch], dtype=np.int64)
    upstream = np.stack([np.asarray(up, dtype=np.float64) for _, up in batch])
    _, cache = forward_batch(params, ids, lengths)
    return backward_batch(params, cache, upstream)


def save_encoder(path: str | Path, params: EncoderParams) -> None:
    tensorio.save_tensors(path, {"encoder_config": params.config.to_dict()}, params.tensors)


def load_encoder(path: str | Path) -> EncoderParams:
    header, tensors = tensorio.load_tensors(path)
    config = EncoderConfig.from_dict(header["encoder_config"])
    return EncoderParams(config=config, tensors=tensors)
