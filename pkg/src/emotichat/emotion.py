"""Convolutional emotion classifier over frozen word embeddings.

One 1-D convolution per filter width slides over the embedded tokens
(valid positions only, so padding never enters a window), followed by
ReLU, max-over-time pooling, feature concatenation, inverted dropout
(training only), and an affine projection to class logits. Embeddings are
initialized from the pretrained word-vector table and stay frozen, which
keeps the classifier in the same space as the sentence and emoji vectors.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import tensorio
from .embeddings import WordVectorTable
from .optim import Adam
from .text import (
    DEFAULT_MAX_LEN,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    TokenSequence,
    Vocabulary,
    _vocabulary_from_counts,
    build_vocabulary,
    encode_sequence,
    tokenize,
)


class ClassifierError(ValueError):
    pass


class ClassifierTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CnnConfig:
    filter_widths: tuple[int, ...] = (2, 3, 4)
    filters_per_width: int = 32
    embedding_dim: int = 300
    num_classes: int = 10
    dropout_keep: float = 0.5
    learning_rate: float = 0.001
    decay: float = 1e-6
    epochs: int = 2
    batch_size: int = 128
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ClassifierError(f"filter widths must all be >= 1, got {self.filter_widths}")
        if self.num_classes < 2:
            raise ClassifierError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0 < self.dropout_keep <= 1:
            raise ClassifierError(f"dropout keep-probability must be in (0, 1], got {self.dropout_keep}")
        object.__setattr__(self, "filter_widths", tuple(self.filter_widths))
        if self.max_len < max(self.filter_widths):
            raise ClassifierError("max_len must be at least the largest filter width")

    @property
    def total_filters(self) -> int:
        return self.filters_per_width * len(self.filter_widths)

    @property
    def max_width(self) -> int:
        return max(self.filter_widths)

    def to_dict(self) -> dict:
        return {
            "filter_widths": list(self.filter_widths),
            "filters_per_width": self.filters_per_width,
            "embedding_dim": self.embedding_dim,
            "num_classes": self.num_classes,
            "dropout_keep": self.dropout_keep,
            "learning_rate": self.learning_rate,
            "decay": self.decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "max_len": self.max_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CnnConfig":
        data = dict(data)
        data["filter_widths"] = tuple(data["filter_widths"])
        return cls(**data)


@dataclass
class CnnParams:
    config: CnnConfig
    labels: tuple[str, ...]
    vocab: Vocabulary
    tensors: dict[str, np.ndarray]

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k != "embedding"}


def init_classifier(
    config: CnnConfig, vocab: Vocabulary, table: WordVectorTable, labels: Sequence[str]
) -> CnnParams:
    """Build parameters with the embedding rows taken from the word-vector
    table; reserved rows are zero and out-of-table words get seeded random
    rows so distinct tokens stay distinguishable."""
    if table.dimension != config.embedding_dim:
        raise ClassifierError(
            f"embedding_dim {config.embedding_dim} does not match table dimension {table.dimension}"
        )
    if len(labels) != config.num_classes:
        raise ClassifierError(f"expected {config.num_classes} labels, got {len(labels)}")
    rng = np.random.default_rng(config.seed)
    d = config.embedding_dim
    embedding = np.zeros((len(vocab), d), dtype=np.float64)
    scale = 1.0 / math.sqrt(d)
    for token, idx in vocab.token_to_id.items():
        if idx in (PAD_ID, UNK_ID, SEP_ID):
            continue
        vec = table.get(token)
        embedding[idx] = vec if vec is not None else rng.uniform(-scale, scale, size=d)

    tensors: dict[str, np.ndarray] = {"embedding": embedding}
    for w in config.filter_widths:
        tensors[f"conv{w}.kernel"] = rng.uniform(
            -1.0 / math.sqrt(w * d), 1.0 / math.sqrt(w * d), size=(w, d, config.filters_per_width)
        )
        tensors[f"conv{w}.bias"] = np.zeros(config.filters_per_width)
    tensors["out.weight"] = rng.uniform(
        -1.0 / math.sqrt(config.total_filters), 1.0 / math.sqrt(config.total_filters),
        size=(config.total_filters, config.num_classes),
    )
    tensors["out.bias"] = np.zeros(config.num_classes)
    return CnnParams(config=config, labels=tuple(labels), vocab=vocab, tensors=tensors)


def _forward(
    params: CnnParams,
    ids: np.ndarray,
    lengths: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Batched forward pass. `dropout_rng` enables inverted dropout on the
    pooled features (training mode)."""
    cfg = params.config
    if np.any(lengths < cfg.max_width):
        raise ClassifierError(
            f"sequence shorter than the largest filter width {cfg.max_width}"
        )
    emb = params.tensors["embedding"][ids]  # (B,T,D)
    b_size, seq_len, _ = emb.shape

    pooled_parts = []
    cache: dict = {"per_width": {}, "ids": ids, "lengths": lengths}
    for w in cfg.filter_widths:
        windows = sliding_window_view(emb, w, axis=1)  # (B, P, D, w)
        act = np.einsum("bpdj,jdf->bpf", windows, params.tensors[f"conv{w}.kernel"])
        act += params.tensors[f"conv{w}.bias"]
        relu = np.maximum(act, 0.0)
        valid = np.arange(act.shape[1])[None, :] <= (lengths[:, None] - w)  # (B,P)
        masked = np.where(valid[:, :, None], relu, -np.inf)
        argmax = masked.argmax(axis=1)  # (B,F)
        pooled = np.take_along_axis(masked, argmax[:, None, :], axis=1)[:, 0, :]
        pooled_parts.append(pooled)
        cache["per_width"][w] = {"windows": windows, "act": act, "argmax": argmax}

    features = np.concatenate(pooled_parts, axis=1)  # (B, total)
    if dropout_rng is not None and cfg.dropout_keep < 1.0:
        keep = (dropout_rng.random(features.shape) < cfg.dropout_keep) / cfg.dropout_keep
    else:
        keep = np.ones_like(features)
    dropped = features * keep
    logits = dropped @ params.tensors["out.weight"] + params.tensors["out.bias"]
    cache.update({"features": features, "keep": keep, "dropped": dropped})
    return logits, cache


def _backward(params: CnnParams, cache: dict, d_logits: np.ndarray) -> dict[str, np.ndarray]:
    cfg = params.config
    grads = {name: np.zeros_like(arr) for name, arr in params.trainable().items()}
    grads["out.weight"] += cache["dropped"].T @ d_logits
    grads["out.bias"] += d_logits.sum(axis=0)
    d_features = (d_logits @ params.tensors["out.weight"].T) * cache["keep"]

    offset = 0
    for w in cfg.filter_widths:
        wc = cache["per_width"][w]
        d_pooled = d_features[:, offset : offset + cfg.filters_per_width]  # (B,F)
        offset += cfg.filters_per_width
        d_relu = np.zeros_like(wc["act"])
        np.put_along_axis(d_relu, wc["argmax"][:, None, :], d_pooled[:, None, :], axis=1)
        d_act = d_relu * (wc["act"] > 0)
        grads[f"conv{w}.kernel"] += np.einsum("bpdj,bpf->jdf", wc["windows"], d_act)
        grads[f"conv{w}.bias"] += d_act.sum(axis=(0, 1))
    return grads


def _pad_lengths(cfg: CnnConfig, lengths: np.ndarray) -> np.ndarray:
    # inference leniency: short inputs count trailing PAD rows as positions
    return np.maximum(lengths, cfg.max_width)


def cnn_forward(params: CnnParams, seq: TokenSequence) -> np.ndarray:
    """Logits for one sequence; errors if it is shorter than the widest filter."""
    ids = np.asarray(seq.ids, dtype=np.int64)[None, :]
    lengths = np.array([seq.true_length], dtype=np.int64)
    logits, _ = _forward(params, ids, lengths)
    return logits[0]


def _class_probabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def predict_emotion(params: CnnParams, text: str) -> tuple[str, np.ndarray]:
    """Most likely label (dropout off, ties to the lowest label index) and
    the full probability vector."""
    tokens = tokenize(text, params.vocab.separator)
    seq = encode_sequence(tokens, params.vocab, params.config.max_len)
    lengths = _pad_lengths(params.config, np.array([seq.true_length], dtype=np.int64))
    ids = np.asarray(seq.ids, dtype=np.int64)[None, : int(lengths[0])]
    logits, _ = _forward(params, ids, lengths)
    probs = _class_probabilities(logits[0])
    return params.labels[int(np.argmax(probs))], probs


def train_classifier(
    data: list[tuple[str, str]],
    config: CnnConfig,
    table: WordVectorTable,
    labels: Sequence[str],
    log_every: int = 0,
) -> tuple[CnnParams, list[float]]:
    """Train on (text, label) pairs with Adam and per-step learning-rate
    decay; returns the parameters and the per-epoch mean cross-entropy."""
    labels = tuple(labels)
    label_to_index = {lab: i for i, lab in enumerate(labels)}
    for text, label in data:
        if label not in label_to_index:
            raise ClassifierError(f"label {label!r} is not in the configured label set {list(labels)}")
    if len(data) < config.batch_size:
        raise ClassifierError(f"need at least batch_size={config.batch_size} examples, got {len(data)}")

    token_lists = [tokenize(text) for text, _ in data]
    vocab = build_vocabulary(token_lists, min_count=1)
    params = init_classifier(config, vocab, table, labels)

    seqs = [encode_sequence(toks, vocab, config.max_len) for toks in token_lists]
    ids = np.stack([s.ids for s in seqs])
    lengths = _pad_lengths(config, np.array([s.true_length for s in seqs], dtype=np.int64))
    gold = np.array([label_to_index[label] for _, label in data], dtype=np.int64)

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(config.learning_rate, decay=config.decay)
    n = len(data)
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            t_max = int(lengths[batch].max())
            logits, cache = _forward(params, ids[batch][:, :t_max], lengths[batch], dropout_rng=rng)
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            log_probs = shifted - log_z
            batch_loss = float(-log_probs[np.arange(len(batch)), gold[batch]].mean())
            if not np.isfinite(batch_loss):
                raise ClassifierTrainingError(
                    f"loss became non-finite at epoch {epoch}; "
                    f"try a smaller learning rate than {config.learning_rate}"
                )
            d_logits = np.exp(log_probs)
            d_logits[np.arange(len(batch)), gold[batch]] -= 1.0
            d_logits /= len(batch)
            grads = _backward(params, cache, d_logits)
            optimizer.step(params.tensors, grads)
            loss_sum += batch_loss * len(batch)
        trace.append(loss_sum / n)
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{config.epochs}  mean cross-entropy {trace[-1]:.4f}")
    return params, trace


def save_classifier(path: str | Path, params: CnnParams) -> None:
    header = {
        "cnn_config": params.config.to_dict(),
        "labels": list(params.labels),
        "vocab": sorted(params.vocab.counts.items()),
        "vocab_min_count": params.vocab.min_count,
        "separator": params.vocab.separator,
    }
    tensorio.save_tensors(path, header, params.tensors)


def load_classifier(path: str | Path) -> CnnParams:
    header, tensors = tensorio.load_tensors(path)
    counts = Counter({token: int(count) for token, count in header["vocab"]})
    vocab = _vocabulary_from_counts(counts, header["vocab_min_count"], header["separator"])
    return CnnParams(
        config=CnnConfig.from_dict(header["cnn_config"]),
        labels=tuple(header["labels"]),
        vocab=vocab,
        tensors=tensors,
    )
