"""Tokenization, vocabulary construction, and fixed-length integer encoding."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

PAD_ID = 0
UNK_ID = 1
SEP_ID = 2

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
DEFAULT_SEPARATOR = "</s>"

DEFAULT_MAX_LEN = 100

# Pictographs, emoticons, transport, supplemental symbols, dingbats,
# variation selectors, ZWJ, keycap combiner, regional indicators.
_EMOJI_PATTERN = re.compile(
    "["
    "\U0001f300-\U0001faff"
    "☀-➿"
    "︀-️"
    "‍"
    "⃣"
    "\U0001f1e6-\U0001f1ff"
    "]+"
)

_TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class VocabularyError(ValueError):
    pass


def is_emoji(text: str) -> bool:
    """True if `text` is a non-empty string made entirely of emoji codepoints."""
    return bool(text) and _EMOJI_PATTERN.fullmatch(text) is not None


def strip_emoji(text: str) -> str:
    return _EMOJI_PATTERN.sub(" ", text)


def tokenize(text: str, separator: str = DEFAULT_SEPARATOR) -> list[str]:
    """Split text into lowercase word and punctuation tokens.

    Emoji codepoints are dropped, punctuation characters become their own
    tokens, and the reserved separator survives as a single atomic token.
    """
    if not text:
        return []
    tokens: list[str] = []
    for chunk in text.split(separator):
        chunk = strip_emoji(chunk).lower()
        tokens.extend(_TOKEN_PATTERN.findall(chunk))
        tokens.append(separator)
    tokens.pop()  # no separator after the final chunk
    return tokens


@dataclass
class Vocabulary:
    """Token/id bijection with reserved PAD, UNK, and separator entries.

    `counts` records the frequency of every corpus token, including tokens
    that fell below `min_count` and therefore got no id; the unigram
    distribution `p(w)` is taken over all of them.
    """

    token_to_id: dict[str, int]
    id_to_token: list[str]
    counts: dict[str, int]
    min_count: int
    separator: str = DEFAULT_SEPARATOR
    _total: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._total = sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def frequency(self, token: str) -> float:
        """Relative unigram frequency p(w) over the full training corpus."""
        if self._total == 0:
            return 0.0
        return self.counts.get(token, 0) / self._total

    @property
    def frequencies(self) -> Mapping[str, float]:
        return {w: c / self._total for w, c in self.counts.items()}

    def save(self, path: str | Path) -> None:
        """Write one `token<TAB>count` line per counted token."""
        lines = [
            f"{token}\t{count}"
            for token, count in sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, min_count: int = 1, separator: str = DEFAULT_SEPARATOR) -> "Vocabulary":
        counts: Counter[str] = Counter()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                token, count = line.rsplit("\t", 1)
                counts[token] = int(count)
            except ValueError as exc:
                raise VocabularyError(f"line {lineno}: expected 'token<TAB>count', got {line!r}") from exc
        return _vocabulary_from_counts(counts, min_count, separator)


def _vocabulary_from_counts(counts: Counter[str], min_count: int, separator: str) -> Vocabulary:
    if not counts:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")
    id_to_token = [PAD_TOKEN, UNK_TOKEN, separator]
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    id_to_token.extend(kept)
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    return Vocabulary(token_to_id, id_to_token, dict(counts), min_count, separator)


def build_vocabulary(
    corpus_tokens: Iterable[Iterable[str]] | Iterable[str],
    min_count: int = 1,
    separator: str = DEFAULT_SEPARATOR,
) -> Vocabulary:
    """Assign ids to tokens seen at least `min_count` times.

    Ids follow descending frequency with lexicographic tie-breaking, after
    the three reserved entries. Accepts either a flat token iterable or an
    iterable of token lists. Reserved tokens never get a second id and are
    excluded from the frequency table.
    """
    if min_count < 1:
        raise VocabularyError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    reserved = {PAD_TOKEN, UNK_TOKEN, separator}
    for item in corpus_tokens:
        if isinstance(item, str):
            if item not in reserved:
                counts[item] += 1
        else:
            counts.update(t for t in item if t not in reserved)
    return _vocabulary_from_counts(counts, min_count, separator)


@dataclass
class TokenSequence:
    """Fixed-length id vector; entries at and beyond `true_length` are PAD."""

    ids: np.ndarray
    true_length: int

    @property
    def max_len(self) -> int:
        return len(self.ids)


def encode_sequence(tokens: list[str], vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> TokenSequence:
    """Map tokens to ids, keeping the last `max_len` on overflow.

    Overlong inputs keep their tail (the most recent context); short inputs
    are right-padded with PAD. Unknown tokens map to UNK.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if len(tokens) > max_len:
        tokens = tokens[-max_len:]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, token in enumerate(tokens):
        ids[i] = vocab.id_of(token)
    return TokenSequence(ids=ids, true_length=len(tokens))


def decode_sequence(seq: TokenSequence, vocab: Vocabulary) -> list[str]:
    return [vocab.id_to_token[i] for i in seq.ids[: seq.true_length]]
