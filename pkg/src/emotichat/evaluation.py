"""Automatic metrics: sentence BLEU, rank-1 precision, classifier scores.

BLEU-n here is the sentence-level clipped n-gram precision score with
brevity penalty min(1, e^(1 - r/c)) and an explicit smoothing rule: any
zero n-gram precision is replaced by 1/(2c) before taking logs, where c
is the candidate length. The headline number is the mean of BLEU-1..4.

P@1,n asks whether the gold response outranks n-1 seeded distractors; a
tie counts as a miss.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import ContextResponsePair
from .retrieval import RetrievalModel, encode_context, encode_texts, retrieve
from .text import tokenize


class EvaluationError(ValueError):
    pass


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str], reference: Sequence[str], max_n: int = 4
) -> tuple[list[float], float]:
    """Sentence BLEU-1..max_n and their mean for one candidate/reference
    token pair. An empty candidate scores zero across the board."""
    if not reference:
        raise EvaluationError("BLEU reference must be non-empty")
    c = len(candidate)
    if c == 0:
        return [0.0] * max_n, 0.0
    r = len(reference)

    smoothing = 1.0 / (2.0 * c)
    precisions: list[float] = []
    for n in range(1, max_n + 1):
        total = max(c - n + 1, 0)
        if total == 0:
            precisions.append(smoothing)
            continue
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        precisions.append(clipped / total if clipped > 0 else smoothing)

    brevity = min(1.0, math.exp(1.0 - r / c))
    scores = [
        brevity * math.exp(sum(math.log(p) for p in precisions[:n]) / n)
        for n in range(1, max_n + 1)
    ]
    return scores, sum(scores) / max_n


def _precision_at_1(
    golds: list[str],
    distinct_responses: list[str],
    n: int,
    seed: int,
    score_fn: Callable[[int, list[str]], np.ndarray],
) -> float:
    if n < 2:
        raise EvaluationError(f"candidate set size must be >= 2, got {n}")
    if len(distinct_responses) < n:
        raise EvaluationError(
            f"need at least {n} distinct responses for P@1,{n}, got {len(distinct_responses)}"
        )
    rng = np.random.default_rng(seed)
    hits = 0
    for i, gold in enumerate(golds):
        others = [t for t in distinct_responses if t != gold]
        picks = rng.choice(len(others), size=n - 1, replace=False)
        candidates = [gold] + [others[int(j)] for j in picks]
        scores = score_fn(i, candidates)
        if scores[0] > np.max(scores[1:]):
            hits += 1
    return hits / len(golds)


def precision_at_1_of_n(
    model: RetrievalModel,
    test_pairs: list[ContextResponsePair],
    n: int = 100,
    seed: int = 0,
) -> float:
    """Fraction of pairs whose gold response scores strictly above n-1
    distractors drawn (seeded, without replacement) from the other test
    responses."""
    if not test_pairs:
        raise EvaluationError("no test pairs given")
    distinct = list(dict.fromkeys(p.response_text for p in test_pairs))
    if len(distinct) < n:
        raise EvaluationError(f"need at least {n} distinct responses for P@1,{n}, got {len(distinct)}")
    vectors = dict(
        zip(distinct, encode_texts(model.candidate_params, model.vocab, distinct, model.max_len))
    )
    context_vecs = [encode_context(model, p.context_text) for p in test_pairs]

    def score_fn(i: int, candidates: list[str]) -> np.ndarray:
        matrix = np.stack([vectors[t] for t in candidates])
        return matrix @ context_vecs[i]

    return _precision_at_1([p.response_text for p in test_pairs], distinct, n, seed, score_fn)


def classification_metrics(
    predictions: Sequence[str], golds: Sequence[str], label_set: Sequence[str]
) -> tuple[float, float, float]:
    """(micro accuracy, macro accuracy, macro F1).

    Macro accuracy averages per-class recall over classes that occur in
    the golds; macro F1 averages per-class F1 over the whole label set,
    with classes absent from the golds contributing zero.
    """
    if len(predictions) != len(golds):
        raise EvaluationError(f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise EvaluationError("cannot compute metrics over empty input")
    labels = list(label_set)
    known = set(labels)
    for i, (pred, gold) in enumerate(zip(predictions, golds)):
        if pred not in known:
            raise EvaluationError(f"prediction {i} has out-of-set label {pred!r}")
        if gold not in known:
            raise EvaluationError(f"gold {i} has out-of-set label {gold!r}")

    correct = sum(p == g for p, g in zip(predictions, golds))
    micro = correct / len(golds)

    recalls: list[float] = []
    f1_total = 0.0
    for label in labels:
        tp = sum(p == label and g == label for p, g in zip(predictions, golds))
        gold_count = sum(g == label for g in golds)
        pred_count = sum(p == label for p in predictions)
        if gold_count > 0:
            recall = tp / gold_count
            recalls.append(recall)
            precision = tp / pred_count if pred_count > 0 else 0.0
            if precision + recall > 0:
                f1_total += 2 * precision * recall / (precision + recall)
    macro_acc = sum(recalls) / len(recalls)
    macro_f1 = f1_total / len(labels)
    return micro, macro_acc, macro_f1


@dataclass
class MetricReport:
    """Evaluation summary; every score lives in [0, 1]."""

    bleu_scores: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    avg_bleu: float = 0.0
    p_at_1: float | None = None
    p_at_n: int | None = None
    micro_acc: float | None = None
    macro_acc: float | None = None
    macro_f1: float | None = None
    bleu_samples: int = 0
    ranking_pairs: int = 0
    classified_samples: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bleu_1": self.bleu_scores[0], "bleu_2": self.bleu_scores[1],
            "bleu_3": self.bleu_scores[2], "bleu_4": self.bleu_scores[3],
            "avg_bleu": self.avg_bleu,
            "p_at_1": self.p_at_1, "p_at_n": self.p_at_n,
            "micro_acc": self.micro_acc, "macro_acc": self.macro_acc, "macro_f1": self.macro_f1,
            "bleu_samples": self.bleu_samples, "ranking_pairs": self.ranking_pairs,
            "classified_samples": self.classified_samples,
            **self.extras,
        }

    def to_text(self) -> str:
        lines = [
            f"BLEU-1..4 (x100): "
            + "  ".join(f"{100 * s:.2f}" for s in self.bleu_scores)
            + f"   avg {100 * self.avg_bleu:.2f}   ({self.bleu_samples} samples)",
        ]
        if self.p_at_1 is not None:
            lines.append(f"P@1,{self.p_at_n}: {100 * self.p_at_1:.2f}%   ({self.ranking_pairs} pairs)")
        if self.micro_acc is not None:
            lines.append(
                f"classifier micro {100 * self.micro_acc:.1f}%  macro {100 * self.macro_acc:.1f}%  "
                f"macro-F1 {100 * self.macro_f1:.1f}%   ({self.classified_samples} samples)"
            )
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def evaluate_retrieval(
    model: RetrievalModel,
    test_pairs: list[ContextResponsePair],
    p_at_n: int | None = 100,
    seed: int = 0,
) -> MetricReport:
    """Retrieve a reply per test context and score it: per-sample BLEU-1..4
    against the gold response (averaged across samples) plus P@1,n."""
    if not test_pairs:
        raise EvaluationError("no test pairs given")
    per_n = np.zeros(4)
    averages = []
    for pair in test_pairs:
        reply, _ = retrieve(model, pair.context_text, k=1)[0]
        scores, avg = bleu(tokenize(reply), tokenize(pair.response_text))
        per_n += np.array(scores)
        averages.append(avg)
    per_n /= len(test_pairs)

    report = MetricReport(
        bleu_scores=tuple(float(x) for x in per_n),
        avg_bleu=float(np.mean(averages)),
        bleu_samples=len(test_pairs),
    )
    if p_at_n is not None:
        report.p_at_1 = precision_at_1_of_n(model, test_pairs, n=p_at_n, seed=seed)
        report.p_at_n = p_at_n
        report.ranking_pairs = len(test_pairs)
    return report
