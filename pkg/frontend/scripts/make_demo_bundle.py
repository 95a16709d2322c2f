"""Build a small copy-corpus bundle for web-client integration tests.

Trains a retriever on synthetic copy pairs (so a training context's gold
response is recoverable), adds a classifier trained on the bundled sample
corpus, and writes a service config plus probe messages whose expected
replies were verified against the trained model.

Usage: python3 make_demo_bundle.py OUTPUT_DIR
"""

import json
import sys
from pathlib import Path

import numpy as np

from emotichat import default_emoji_map_path, default_word_vectors_path, sample_corpus_path
from emotichat import encoder as enc
from emotichat import retrieval as rtv
from emotichat.corpus import ContextResponsePair, parse_corpus
from emotichat.embeddings import load_word_vectors
from emotichat.emotion import CnnConfig, save_classifier, train_classifier
from emotichat.text import build_vocabulary, tokenize


def make_pairs(n_pairs=120, vocab_words=200, seed=0):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab_words)]
    pairs = []
    for idx in range(n_pairs):
        chosen = rng.choice(vocab_words, size=int(rng.integers(3, 7)), replace=False)
        context = [words[int(i)] for i in chosen]
        response = list(context)
        rng.shuffle(response)
        pairs.append(ContextResponsePair(" ".join(context), " ".join(response), f"demo-{idx}"))
    return pairs


def main() -> int:
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    bundle = out / "bundle"

    pairs = make_pairs(seed=0)
    vocab = build_vocabulary([tokenize(p.context_text) for p in pairs], min_count=1)
    config = enc.EncoderConfig(kind="bag_of_embeddings", vocab_size=len(vocab),
                               model_dim=32, max_len=12, seed=0)
    ctx = enc.init_params(config)
    cand = enc.init_params(enc.EncoderConfig(**{**config.to_dict(), "seed": 1}))
    train_config = rtv.TrainConfig(epochs=60, batch_size=32, learning_rate=1e-2,
                                   optimizer="adamax", seed=0)
    model, _ = rtv.train(pairs, ctx, cand, vocab, train_config)
    rtv.save_bundle(bundle, model, train_config=train_config, split_seed=0)

    table = load_word_vectors(default_word_vectors_path())
    conversations = parse_corpus(sample_corpus_path().read_bytes())
    labels = sorted({c.emotion for c in conversations})
    cnn_config = CnnConfig(embedding_dim=table.dimension, num_classes=len(labels),
                           filters_per_width=8, epochs=1, batch_size=8, seed=0)
    classifier, _ = train_classifier([(c.context, c.emotion) for c in conversations],
                                     cnn_config, table, labels)
    save_classifier(bundle / "classifier.ectf", classifier)

    probes = []
    for pair in pairs:
        if len(probes) == 3:
            break
        top, _ = rtv.retrieve(model, pair.context_text, k=1)[0]
        if top == pair.response_text:
            probes.append({"message": pair.context_text, "reply": pair.response_text})
    if len(probes) < 3:
        print("bundle did not recover enough gold responses", file=sys.stderr)
        return 1

    (out / "probes.json").write_text(json.dumps(probes, indent=2))
    (out / "config.json").write_text(json.dumps({
        "bundle": str(bundle),
        "word_vectors": str(default_word_vectors_path()),
        "emoji_map": str(default_emoji_map_path()),
        "threshold": 0.3,
        "session_dir": str(out / "sessions"),
    }, indent=2))
    print(str(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
