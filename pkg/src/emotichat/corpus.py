"""Conversation corpus parsing, context/response pair derivation, and splits."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from .text import DEFAULT_SEPARATOR, is_emoji


class Speaker(enum.Enum):
    SPEAKER = "Speaker"
    LISTENER = "Listener"


class CorpusFormatError(ValueError):
    """Raised for malformed corpus records; message names line and field."""


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    text: str
    emoji: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("utterance text is empty after trimming")
        if self.emoji is not None and not is_emoji(self.emoji):
            raise ValueError(f"not a valid emoji grapheme: {self.emoji!r}")


@dataclass(frozen=True)
class Conversation:
    id: str
    emotion: str
    context: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self) -> None:
        if not self.utterances:
            raise ValueError(f"conversation {self.id}: empty utterance list")
        if self.utterances[0].speaker is not Speaker.SPEAKER:
            raise ValueError(f"conversation {self.id}: first utterance must come from the Speaker")


@dataclass(frozen=True)
class ContextResponsePair:
    context_text: str
    response_text: str
    source_conversation: str


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _parse_utterance(raw: dict, lineno: int, index: int) -> Utterance:
    where = f"line {lineno}, utterance {index}"
    speaker_tag = raw.get("speaker")
    try:
        speaker = Speaker(speaker_tag)
    except ValueError:
        raise CorpusFormatError(f"{where}: unknown speaker tag {speaker_tag!r}") from None
    text = raw.get("text")
    if not isinstance(text, str) or not text.strip():
        raise CorpusFormatError(f"{where}: field 'text' missing or empty")
    emoji = raw.get("emoji")
    if emoji is not None:
        if not isinstance(emoji, str) or not is_emoji(emoji):
            raise CorpusFormatError(f"{where}: field 'emoji' is not an emoji grapheme: {emoji!r}")
    return Utterance(speaker=speaker, text=text, emoji=emoji)


def parse_corpus(raw: bytes | str | BinaryIO) -> list[Conversation]:
    """Parse a line-delimited corpus file into Conversation records.

    Each line holds one JSON object with `id`, `emotion`, `context`, and a
    non-empty `utterances` array. Blank lines are skipped. Any malformed
    record raises CorpusFormatError naming the offending line and field.
    """
    if hasattr(raw, "read"):
        raw = raw.read()
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw

    conversations: list[Conversation] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {lineno}: invalid JSON record ({exc.msg})") from None
        if not isinstance(record, dict):
            raise CorpusFormatError(f"line {lineno}: record is not an object")

        for name in ("id", "emotion", "context"):
            if not isinstance(record.get(name), str) or not record[name]:
                raise CorpusFormatError(f"line {lineno}: field {name!r} missing or not a non-empty string")
        utterances_raw = record.get("utterances")
        if not isinstance(utterances_raw, list) or not utterances_raw:
            raise CorpusFormatError(f"line {lineno}: field 'utterances' missing or empty")

        conv_id = record["id"]
        if conv_id in seen_ids:
            raise CorpusFormatError(f"line {lineno}: duplicate conversation id {conv_id!r}")
        seen_ids.add(conv_id)

        utterances = tuple(_parse_utterance(u, lineno, i) for i, u in enumerate(utterances_raw))
        if utterances[0].speaker is not Speaker.SPEAKER:
            raise CorpusFormatError(f"line {lineno}: field 'utterances' must start with a Speaker turn")
        conversations.append(
            Conversation(id=conv_id, emotion=record["emotion"], context=record["context"], utterances=utterances)
        )
    return conversations


def count_utterances(conversations: Iterable[Conversation]) -> int:
    return sum(len(c.utterances) for c in conversations)


def derive_pairs(
    conversations: Iterable[Conversation],
    separator: str = DEFAULT_SEPARATOR,
) -> list[ContextResponsePair]:
    """Build one context/response pair per Listener turn.

    The context is every utterance strictly before that turn, both sides,
    joined by the separator token. Speaker turns never become responses;
    trailing Speaker turns are dropped.
    """
    joiner = f" {separator} "
    pairs: list[ContextResponsePair] = []
    for conv in conversations:
        for i, utt in enumerate(conv.utterances):
            if utt.speaker is Speaker.LISTENER:
                context = joiner.join(u.text for u in conv.utterances[:i])
                pairs.append(
                    ContextResponsePair(
                        context_text=context,
                        response_text=utt.text,
                        source_conversation=conv.id,
                    )
                )
    return pairs


def split_dataset(n: int, ratios: tuple[float, float, float], seed: int) -> DatasetSplit:
    """Partition indices 0..n-1 into train/validation/test deterministically.

    Part sizes follow the largest-remainder method, so each matches its
    exact share to within one element.
    """
    if n < 3:
        raise ValueError(f"need at least 3 items to populate all three parts, got {n}")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    exact = [n * r for r in ratios]
    sizes = [int(x) for x in exact]
    remainders = [x - s for x, s in zip(exact, sizes)]
    for _ in range(n - sum(sizes)):
        i = max(range(3), key=lambda j: (remainders[j], -j))
        sizes[i] += 1
        remainders[i] = -1.0

    order = np.random.default_rng(seed).permutation(n)
    train = tuple(int(i) for i in order[: sizes[0]])
    validation = tuple(int(i) for i in order[sizes[0] : sizes[0] + sizes[1]])
    test = tuple(int(i) for i in order[sizes[0] + sizes[1] :])
    return DatasetSplit(train=train, validation=validation, test=test, seed=seed)
