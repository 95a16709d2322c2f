"""Empathetic retrieval chat with emotion-aware emoji selection."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def sample_corpus_path() -> Path:
    return Path(resources.files("emotichat") / "data" / "sample_corpus.jsonl")


def default_word_vectors_path() -> Path:
    return Path(resources.files("emotichat") / "data" / "mini_vectors.txt")


def default_emoji_map_path() -> Path:
    return Path(resources.files("emotichat") / "config" / "emoji_map.default")
