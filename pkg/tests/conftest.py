import numpy as np
import pytest

from emotichat import default_emoji_map_path, default_word_vectors_path, sample_corpus_path
from emotichat.corpus import derive_pairs, parse_corpus
from emotichat.embeddings import load_word_vectors
from emotichat.text import build_vocabulary, tokenize


@pytest.fixture(scope="session")
def conversations():
    return parse_corpus(sample_corpus_path().read_bytes())


@pytest.fixture(scope="session")
def pairs(conversations):
    return derive_pairs(conversations)


@pytest.fixture(scope="session")
def word_table():
    return load_word_vectors(default_word_vectors_path())


@pytest.fixture(scope="session")
def emoji_map_path():
    return default_emoji_map_path()


@pytest.fixture(scope="session")
def sample_vocab(pairs):
    tokens = [tokenize(p.context_text) + tokenize(p.response_text) for p in pairs]
    return build_vocabulary(tokens, min_count=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
