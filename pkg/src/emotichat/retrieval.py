"""Response retrieval: dot-product scoring, in-batch NLL training, bundles.

Training encodes each batch's contexts and gold responses with the two
encoders; every context treats the other gold responses in the batch as
negatives, and the mean negative log-likelihood of the gold response is
minimized. Inference ranks a pool of candidate responses (all unique
training responses) by h_x . h_y and reports softmax probabilities over
the full pool.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import encoder as enc
from . import tensorio
from .corpus import ContextResponsePair
from .optim import make_optimizer
from .text import DEFAULT_MAX_LEN, Vocabulary, encode_sequence, tokenize

BUNDLE_FORMAT = 1

# Hyperparameter presets for the two published training recipes.
TRAIN_PRESETS: dict[str, dict] = {
    "vanilla": {"epochs": 25, "batch_size": 128, "learning_rate": 8e-4, "optimizer": "adamax"},
    "finetune": {"epochs": 12, "batch_size": 16, "learning_rate": 5e-5, "optimizer": "adamax"},
}


class RetrievalError(ValueError):
    pass


class RetrievalTrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 25
    batch_size: int = 128
    learning_rate: float = 8e-4
    optimizer: str = "adamax"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise RetrievalError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise RetrievalError(f"batch_size must be >= 2 for in-batch negatives, got {self.batch_size}")
        if self.optimizer not in ("adam", "adamax"):
            raise RetrievalError(f"optimizer must be 'adam' or 'adamax', got {self.optimizer!r}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "TrainConfig":
        try:
            base = dict(TRAIN_PRESETS[name])
        except KeyError:
            raise RetrievalError(f"unknown preset {name!r}; choose from {sorted(TRAIN_PRESETS)}") from None
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "learning_rate": self.learning_rate, "optimizer": self.optimizer,
            "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "seed": self.seed,
        }


@dataclass
class CandidatePool:
    responses: list[str]
    vectors: np.ndarray
    stale: bool = False

    def __len__(self) -> int:
        return len(self.responses)

    def mark_stale(self) -> None:
        self.stale = True


@dataclass
class RetrievalModel:
    context_params: enc.EncoderParams
    candidate_params: enc.EncoderParams
    pool: CandidatePool
    vocab: Vocabulary
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self) -> None:
        if self.context_params.config.model_dim != self.candidate_params.config.model_dim:
            raise RetrievalError("context and candidate encoders must share model_dim")


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    exps = np.exp(shifted)
    return exps / exps.sum()


def score_candidates(h_x: np.ndarray, candidate_vectors: np.ndarray) -> np.ndarray:
    """Raw dot products h_x . h_y_i; callers apply softmax when needed."""
    candidate_vectors = np.asarray(candidate_vectors, dtype=np.float64)
    if candidate_vectors.size == 0:
        raise RetrievalError("candidate list is empty")
    if candidate_vectors.shape[-1] != h_x.shape[-1]:
        raise RetrievalError(
            f"dimension mismatch: context {h_x.shape[-1]} vs candidates {candidate_vectors.shape[-1]}"
        )
    return candidate_vectors @ h_x


def nll_loss(scores: np.ndarray, gold_index: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of the gold candidate under a softmax over
    `scores`, with its gradient softmax(scores) - one_hot(gold)."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= gold_index < scores.shape[-1]:
        raise RetrievalError(f"gold index {gold_index} out of range for {scores.shape[-1]} candidates")
    shifted = scores - np.max(scores)
    log_z = np.log(np.exp(shifted).sum())
    loss = float(log_z - shifted[gold_index])
    grad = np.exp(shifted - log_z)
    grad[gold_index] -= 1.0
    return loss, grad


def _encode_pair_texts(
    pairs: list[ContextResponsePair], vocab: Vocabulary, max_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    def encode_side(texts: list[str]) -> tuple[np.ndarray, np.ndarray]:
        seqs = [encode_sequence(tokenize(t, vocab.separator), vocab, max_len) for t in texts]
        ids = np.stack([s.ids for s in seqs])
        lengths = np.array([max(s.true_length, 1) for s in seqs], dtype=np.int64)
        return ids, lengths

    ctx_ids, ctx_len = encode_side([p.context_text for p in pairs])
    resp_ids, resp_len = encode_side([p.response_text for p in pairs])
    return ctx_ids, ctx_len, resp_ids, resp_len


def encode_texts(
    params: enc.EncoderParams, vocab: Vocabulary, texts: list[str],
    max_len: int = DEFAULT_MAX_LEN, chunk: int = 256,
) -> np.ndarray:
    """Encode many texts into an (N, d) matrix, batching for speed."""
    seqs = [encode_sequence(tokenize(t, vocab.separator), vocab, max_len) for t in texts]
    out = np.empty((len(seqs), params.config.model_dim), dtype=np.float64)
    for start in range(0, len(seqs), chunk):
        part = seqs[start : start + chunk]
        ids = np.stack([s.ids for s in part])
        lengths = np.array([max(s.true_length, 1) for s in part], dtype=np.int64)
        t_max = int(lengths.max())
        vectors, _ = enc.forward_batch(params, ids[:, :t_max], lengths)
        out[start : start + len(part)] = vectors
    return out


def build_candidate_pool(
    candidate_params: enc.EncoderParams, vocab: Vocabulary,
    responses: list[str], max_len: int = DEFAULT_MAX_LEN,
) -> CandidatePool:
    unique = list(dict.fromkeys(responses))
    if not unique:
        raise RetrievalError("cannot build a pool from zero responses")
    vectors = encode_texts(candidate_params, vocab, unique, max_len)
    return CandidatePool(responses=unique, vectors=vectors, stale=False)


def train(
    pairs: list[ContextResponsePair],
    context_params: enc.EncoderParams,
    candidate_params: enc.EncoderParams,
    vocab: Vocabulary,
    config: TrainConfig,
    log_every: int = 0,
) -> tuple[RetrievalModel, list[float]]:
    """In-batch-negative training; returns the model and per-epoch mean loss.

    Deterministic for a fixed config seed: epoch shuffles come from one
    seeded generator and all arithmetic is float64.
    """
    if len(pairs) < config.batch_size:
        raise RetrievalError(f"need at least batch_size={config.batch_size} pairs, got {len(pairs)}")
    max_len = context_params.config.max_len
    ctx_ids, ctx_len, resp_ids, resp_len = _encode_pair_texts(pairs, vocab, max_len)

    rng = np.random.default_rng(config.seed)
    opt_kwargs = {"beta1": config.beta1, "beta2": config.beta2, "eps": config.eps}
    ctx_opt = make_optimizer(config.optimizer, config.learning_rate, **opt_kwargs)
    cand_opt = make_optimizer(config.optimizer, config.learning_rate, **opt_kwargs)

    n = len(pairs)
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        seen = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            if len(batch) < 2:
                continue
            t_max = int(max(ctx_len[batch].max(), resp_len[batch].max()))
            hx, ctx_cache = enc.forward_batch(context_params, ctx_ids[batch][:, :t_max], ctx_len[batch])
            hy, cand_cache = enc.forward_batch(candidate_params, resp_ids[batch][:, :t_max], resp_len[batch])
            scores = hx @ hy.T
            shifted = scores - scores.max(axis=1, keepdims=True)
            log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            log_probs = shifted - log_z
            batch_loss = float(-np.trace(log_probs) / len(batch))
            if not np.isfinite(batch_loss):
                raise RetrievalTrainingError(
                    f"loss became non-finite at epoch {epoch}; "
                    f"try a smaller learning rate than {config.learning_rate}"
                )
            d_scores = (np.exp(log_probs) - np.eye(len(batch))) / len(batch)
            ctx_grads = enc.backward_batch(context_params, ctx_cache, d_scores @ hy)
            cand_grads = enc.backward_batch(candidate_params, cand_cache, d_scores.T @ hx)
            ctx_opt.step(context_params.tensors, ctx_grads)
            cand_opt.step(candidate_params.tensors, cand_grads)
            loss_sum += batch_loss * len(batch)
            seen += len(batch)
        trace.append(loss_sum / seen)
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{config.epochs}  mean NLL {trace[-1]:.4f}")

    pool = build_candidate_pool(candidate_params, vocab, [p.response_text for p in pairs], max_len)
    model = RetrievalModel(
        context_params=context_params, candidate_params=candidate_params,
        pool=pool, vocab=vocab, max_len=max_len,
    )
    return model, trace


def encode_context(model: RetrievalModel, context_text: str) -> np.ndarray:
    tokens = tokenize(context_text, model.vocab.separator)
    seq = encode_sequence(tokens, model.vocab, model.max_len)
    if seq.true_length == 0:
        raise RetrievalError("context has no tokens after tokenization")
    return enc.encode(model.context_params, seq)


def retrieve(model: RetrievalModel, context_text: str, k: int = 1) -> list[tuple[str, float]]:
    """Top-k responses with softmax probabilities over the full pool.

    Ties are broken by pool index, so the ranking is reproducible.
    """
    if model.pool.stale:
        raise RetrievalError("candidate pool is stale; rebuild it with build_candidate_pool")
    if len(model.pool) == 0:
        raise RetrievalError("candidate pool is empty")
    if not 1 <= k <= len(model.pool):
        raise RetrievalError(f"k must be in [1, {len(model.pool)}], got {k}")
    h_x = encode_context(model, context_text)
    scores = score_candidates(h_x, model.pool.vectors)
    probs = softmax(scores)
    order = np.argsort(-scores, kind="stable")[:k]
    return [(model.pool.responses[int(i)], float(probs[int(i)])) for i in order]


# -- bundle persistence -------------------------------------------------

def save_bundle(
    bundle_dir: str | Path,
    model: RetrievalModel,
    train_config: TrainConfig | None = None,
    split_seed: int | None = None,
    min_count: int | None = None,
    extra_manifest: dict | None = None,
) -> None:
    path = Path(bundle_dir)
    path.mkdir(parents=True, exist_ok=True)
    enc.save_encoder(path / "context_encoder.ectf", model.context_params)
    enc.save_encoder(path / "candidate_encoder.ectf", model.candidate_params)
    tensorio.save_tensors(
        path / "candidates.ectf",
        {"responses": model.pool.responses},
        {"vectors": model.pool.vectors},
    )
    model.vocab.save(path / "vocab.tsv")

    digest = hashlib.sha256()
    for name in ("context_encoder.ectf", "candidate_encoder.ectf", "candidates.ectf", "vocab.tsv"):
        digest.update((path / name).read_bytes())
    manifest = {
        "bundle_format": BUNDLE_FORMAT,
        "bundle_version": digest.hexdigest()[:16],
        "max_len": model.max_len,
        "separator": model.vocab.separator,
        "min_count": model.vocab.min_count if min_count is None else min_count,
        "split_seed": split_seed,
        "train_config": train_config.to_dict() if train_config else None,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_manifest(bundle_dir: str | Path) -> dict:
    manifest_path = Path(bundle_dir) / "manifest.json"
    if not manifest_path.exists():
        raise RetrievalError(f"{bundle_dir}: not a model bundle (missing manifest.json)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("bundle_format") != BUNDLE_FORMAT:
        raise RetrievalError(f"{bundle_dir}: unsupported bundle format {manifest.get('bundle_format')}")
    return manifest


def load_bundle(bundle_dir: str | Path) -> tuple[RetrievalModel, dict]:
    path = Path(bundle_dir)
    manifest = load_manifest(path)
    context_params = enc.load_encoder(path / "context_encoder.ectf")
    candidate_params = enc.load_encoder(path / "candidate_encoder.ectf")
    pool_header, pool_tensors = tensorio.load_tensors(path / "candidates.ectf")
    pool = CandidatePool(responses=list(pool_header["responses"]), vectors=pool_tensors["vectors"])
    vocab = Vocabulary.load(
        path / "vocab.tsv",
        min_count=manifest.get("min_count", 1),
        separator=manifest.get("separator", "</s>"),
    )
    model = RetrievalModel(
        context_params=context_params, candidate_params=candidate_params,
        pool=pool, vocab=vocab, max_len=manifest.get("max_len", DEFAULT_MAX_LEN),
    )
    return model, manifest
