"""Emotion-keyed emoji buckets and similarity-gated emoji selection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embeddings import (
    DEFAULT_SIF_A,
    EmbeddingError,
    WordVectorTable,
    compose_emoji_vector,
    cosine,
    sif_embed,
)
from .text import is_emoji, tokenize

DEFAULT_THRESHOLD = 0.3


class EmojiMapError(ValueError):
    pass


@dataclass(frozen=True)
class EmojiEntry:
    emoji: str
    keywords: tuple[str, ...]
    vector: np.ndarray


@dataclass
class EmojiMap:
    buckets: dict[str, list[EmojiEntry]]

    def bucket(self, emotion: str) -> list[EmojiEntry]:
        try:
            return self.buckets[emotion]
        except KeyError:
            raise EmojiMapError(f"no emoji bucket for emotion {emotion!r}") from None

    def emotions(self) -> list[str]:
        return list(self.buckets)


@dataclass(frozen=True)
class EmojiChoice:
    """Outcome of selection: `emoji` is present iff similarity cleared the
    threshold; similarity -1 marks a response with nothing embeddable."""

    emoji: str | None
    similarity: float
    emotion: str
    threshold_used: float


def load_emoji_map(
    path: str | Path,
    table: WordVectorTable,
    labels: Sequence[str] | None = None,
) -> EmojiMap:
    """Load a JSON map of emotion -> [{emoji, keywords}] and precompose
    each entry's vector. Every configured label must have a non-empty,
    composable bucket."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EmojiMapError(f"{path}: invalid emoji map file ({exc.msg})") from None
    if not isinstance(raw, dict) or not raw:
        raise EmojiMapError(f"{path}: expected a non-empty object of emotion buckets")

    buckets: dict[str, list[EmojiEntry]] = {}
    for emotion, entries in raw.items():
        if not isinstance(entries, list) or not entries:
            raise EmojiMapError(f"emotion {emotion!r}: bucket is empty")
        bucket: list[EmojiEntry] = []
        for entry in entries:
            glyph = entry.get("emoji") if isinstance(entry, dict) else None
            keywords = entry.get("keywords") if isinstance(entry, dict) else None
            if not isinstance(glyph, str) or not is_emoji(glyph):
                raise EmojiMapError(f"emotion {emotion!r}: entry without a valid emoji grapheme: {entry!r}")
            if not isinstance(keywords, list) or not keywords:
                raise EmojiMapError(f"emoji {glyph}: keyword list missing or empty")
            try:
                vector = compose_emoji_vector(keywords, table)
            except EmbeddingError as exc:
                raise EmojiMapError(f"emoji {glyph}: {exc}") from None
            bucket.append(EmojiEntry(emoji=glyph, keywords=tuple(keywords), vector=vector))
        buckets[emotion] = bucket

    if labels is not None:
        missing = [lab for lab in labels if lab not in buckets]
        if missing:
            raise EmojiMapError(f"emoji map has no bucket for configured emotions: {missing}")
    return EmojiMap(buckets=buckets)


def select_emoji(
    response_text: str,
    emotion: str,
    emoji_map: EmojiMap,
    table: WordVectorTable,
    freqs: Mapping[str, float],
    threshold: float = DEFAULT_THRESHOLD,
    sif_a: float = DEFAULT_SIF_A,
    principal: np.ndarray | None = None,
) -> EmojiChoice:
    """Pick the bucket emoji whose vector is most cosine-similar to the
    response's sentence embedding; attach it only at or above the threshold.

    Ties keep the earliest bucket entry. A response with no embeddable
    tokens yields no emoji and similarity -1.
    """
    bucket = emoji_map.bucket(emotion)
    sentence = sif_embed(tokenize(response_text), table, freqs, a=sif_a, principal=principal)
    if not np.any(sentence.vector):
        return EmojiChoice(emoji=None, similarity=-1.0, emotion=emotion, threshold_used=threshold)

    best_entry = bucket[0]
    best_similarity = cosine(sentence.vector, bucket[0].vector)
    for entry in bucket[1:]:
        similarity = cosine(sentence.vector, entry.vector)
        if similarity > best_similarity:
            best_entry, best_similarity = entry, similarity
    chosen = best_entry.emoji if best_similarity >= threshold else None
    return EmojiChoice(
        emoji=chosen, similarity=best_similarity, emotion=emotion, threshold_used=threshold
    )


def append_emoji(text: str, choice: EmojiChoice) -> str:
    """Append the chosen emoji after a single space; empty text stays empty."""
    if choice.emoji is None or not text:
        return text
    return f"{text} {choice.emoji}"
