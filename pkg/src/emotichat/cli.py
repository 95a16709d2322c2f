"""Command-line entry points: train, evaluate, chat, and serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import default_emoji_map_path, default_word_vectors_path
from .corpus import derive_pairs, parse_corpus, split_dataset
from .emotion import CnnConfig, save_classifier, train_classifier, predict_emotion
from .encoder import EncoderConfig, EncoderKind, init_params
from .evaluation import classification_metrics, evaluate_retrieval
from .retrieval import (
    TRAIN_PRESETS,
    TrainConfig,
    load_bundle,
    save_bundle,
    train,
)
from .service import ChatEngine, EngineConfig, ServiceError, create_app
from .text import build_vocabulary, tokenize


def _load_json_config(parser: argparse.ArgumentParser, path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        parser.error(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        parser.error(f"malformed config file {path}: {exc.msg}")
    if not isinstance(data, dict):
        parser.error(f"config file {path} must hold a JSON object")
    return data


def _read_corpus(path: str):
    with open(path, "rb") as fh:
        return parse_corpus(fh)


def _cmd_train_retriever(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    cfg = _load_json_config(parser, args.config)
    corpus_path = args.corpus or cfg.get("corpus")
    out_dir = args.out or cfg.get("bundle")
    if not corpus_path or not out_dir:
        parser.error("train-retriever needs --corpus and --out (or config keys corpus/bundle)")

    preset = args.preset or cfg.get("preset", "vanilla")
    overrides = {}
    for key, value in (
        ("epochs", args.epochs), ("batch_size", args.batch_size),
        ("learning_rate", args.lr), ("seed", args.seed),
    ):
        if value is not None:
            overrides[key] = value
    train_config = TrainConfig.from_preset(preset, **overrides)

    conversations = _read_corpus(corpus_path)
    pairs = derive_pairs(conversations)
    split_seed = args.split_seed if args.split_seed is not None else cfg.get("seed", train_config.seed)
    split = split_dataset(len(pairs), (0.8, 0.1, 0.1), seed=split_seed)
    train_pairs = [pairs[i] for i in split.train]
    print(f"{len(conversations)} conversations, {len(pairs)} pairs "
          f"(train/val/test {split.sizes[0]}/{split.sizes[1]}/{split.sizes[2]})")

    tokens = [tokenize(p.context_text) + tokenize(p.response_text) for p in train_pairs]
    vocab = build_vocabulary(tokens, min_count=args.min_count)
    print(f"vocabulary: {len(vocab)} tokens")

    encoder_config = EncoderConfig(
        kind=EncoderKind(args.encoder),
        vocab_size=len(vocab),
        model_dim=args.model_dim,
        layers=args.layers,
        heads=args.heads,
        feedforward_dim=args.ff_dim,
        max_len=args.max_len,
        seed=train_config.seed,
    )
    context_params = init_params(encoder_config)
    candidate_params = init_params(
        EncoderConfig(**{**encoder_config.to_dict(), "seed": encoder_config.seed + 1})
    )
    model, trace = train(train_pairs, context_params, candidate_params, vocab, train_config, log_every=1)
    save_bundle(out_dir, model, train_config=train_config, split_seed=split_seed, min_count=args.min_count)
    print(f"bundle written to {out_dir} (final epoch loss {trace[-1]:.4f})")
    return 0


def _cmd_train_classifier(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    cfg = _load_json_config(parser, args.config)
    corpus_path = args.corpus or cfg.get("corpus")
    out_dir = args.out or cfg.get("bundle")
    if not corpus_path or not out_dir:
        parser.error("train-classifier needs --corpus and --out (or config keys corpus/bundle)")
    vectors_path = args.vectors or cfg.get("word_vectors") or str(default_word_vectors_path())

    from .embeddings import load_word_vectors

    table = load_word_vectors(vectors_path)
    conversations = _read_corpus(corpus_path)
    labels = sorted({c.emotion for c in conversations})
    data = [(c.context, c.emotion) for c in conversations]

    split_seed = args.split_seed if args.split_seed is not None else cfg.get("seed", args.seed or 0)
    split = split_dataset(len(data), (0.72, 0.08, 0.20), seed=split_seed)
    train_data = [data[i] for i in split.train]

    cnn_config = CnnConfig(
        embedding_dim=table.dimension,
        num_classes=len(labels),
        filters_per_width=args.filters,
        learning_rate=args.lr if args.lr is not None else 0.001,
        decay=args.decay,
        epochs=args.epochs if args.epochs is not None else 2,
        batch_size=min(args.batch_size or 128, max(2, len(train_data))),
        seed=args.seed or 0,
    )
    params, trace = train_classifier(train_data, cnn_config, table, labels, log_every=1)

    for name, indices in (("validation", split.validation), ("test", split.test)):
        subset = [data[i] for i in indices]
        if not subset:
            continue
        preds = [predict_emotion(params, text)[0] for text, _ in subset]
        micro, macro, f1 = classification_metrics(preds, [lab for _, lab in subset], labels)
        print(f"{name}: micro {100 * micro:.1f}%  macro {100 * macro:.1f}%  macro-F1 {100 * f1:.1f}%")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_classifier(out / "classifier.ectf", params)
    print(f"classifier written to {out / 'classifier.ectf'} (labels: {', '.join(labels)})")
    return 0


def _cmd_eval(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    cfg = _load_json_config(parser, args.config)
    bundle_dir = args.bundle or cfg.get("bundle")
    corpus_path = args.corpus or cfg.get("corpus")
    if not bundle_dir or not corpus_path:
        parser.error("eval needs --bundle and --corpus (or config keys bundle/corpus)")

    model, manifest = load_bundle(bundle_dir)
    conversations = _read_corpus(corpus_path)
    pairs = derive_pairs(conversations)
    split_seed = args.split_seed if args.split_seed is not None else manifest.get("split_seed") or 0
    split = split_dataset(len(pairs), (0.8, 0.1, 0.1), seed=split_seed)
    test_pairs = [pairs[i] for i in split.test]

    p_at_n = args.p_at_n if args.p_at_n and args.p_at_n > 1 else None
    report = evaluate_retrieval(model, test_pairs, p_at_n=p_at_n, seed=args.seed or 0)

    classifier_path = Path(bundle_dir) / "classifier.ectf"
    if classifier_path.exists():
        from .emotion import load_classifier

        params = load_classifier(classifier_path)
        data = [(c.context, c.emotion) for c in conversations]
        cls_split = split_dataset(len(data), (0.72, 0.08, 0.20), seed=split_seed)
        subset = [data[i] for i in cls_split.test]
        preds = [predict_emotion(params, text)[0] for text, _ in subset]
        micro, macro, f1 = classification_metrics(preds, [lab for _, lab in subset], list(params.labels))
        report.micro_acc, report.macro_acc, report.macro_f1 = micro, macro, f1
        report.classified_samples = len(subset)

    print(report.to_text())
    if args.report:
        report.save(args.report)
        print(f"report written to {args.report}")
    return 0


def _build_engine(
    parser: argparse.ArgumentParser, args: argparse.Namespace
) -> tuple[ChatEngine, EngineConfig]:
    overrides = {
        "bundle": args.bundle,
        "word_vectors": args.vectors,
        "emoji_map": args.emoji_map,
        "threshold": args.threshold,
        "sif_a": args.sif_a,
        "session_dir": getattr(args, "session_dir", None),
        "static_dir": getattr(args, "static_dir", None),
    }
    if args.no_principal:
        overrides["use_principal"] = False
    if args.config:
        try:
            config = EngineConfig.from_file(args.config, **overrides)
        except ServiceError as exc:
            parser.error(str(exc))
    else:
        if not overrides.get("bundle"):
            parser.error("--bundle is required without a config file")
        config = EngineConfig(
            bundle=overrides["bundle"],
            word_vectors=overrides.get("word_vectors") or str(default_word_vectors_path()),
            emoji_map=overrides.get("emoji_map") or str(default_emoji_map_path()),
            threshold=overrides.get("threshold") if overrides.get("threshold") is not None else 0.3,
            sif_a=overrides.get("sif_a") if overrides.get("sif_a") is not None else 1e-3,
            use_principal=overrides.get("use_principal", True),
            session_dir=overrides.get("session_dir"),
            static_dir=overrides.get("static_dir"),
        )
    return ChatEngine.from_config(config), config


def _cmd_chat(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    engine, _ = _build_engine(parser, args)
    session = engine.sessions.new_session()
    print("emotichat — type a message, or /quit to leave")
    while True:
        try:
            line = input("you> ").strip()
        except (EOFError, KeyboardInterrupt):
            print()
            return 0
        if line in ("/quit", "/exit"):
            return 0
        if not line:
            continue
        result = engine.handle_chat(session, line)
        display = f"{result.reply_text} {result.emoji}" if result.emoji else result.reply_text
        print(f"bot> {display}")
        print(
            f"     [emotion {result.emotion} | similarity {result.similarity:.3f} "
            f"| probability {result.retrieval_probability:.3f}]"
        )


def _cmd_serve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    import uvicorn

    engine, config = _build_engine(parser, args)
    app = create_app(engine, static_dir=config.static_dir)
    port = args.port or int(os.environ.get("EMOTICHAT_PORT", "8000"))
    uvicorn.run(app, host=args.host, port=port)
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON configuration file; flags override its keys")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emotichat", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    tr = subs.add_parser("train-retriever", help="train the bi-encoder response retriever")
    _add_common(tr)
    tr.add_argument("--corpus")
    tr.add_argument("--out", help="bundle output directory")
    tr.add_argument("--preset", choices=sorted(TRAIN_PRESETS))
    tr.add_argument("--encoder", default="transformer", choices=[k.value for k in EncoderKind])
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--split-seed", type=int)
    tr.add_argument("--min-count", type=int, default=1)
    tr.add_argument("--max-len", type=int, default=100)
    tr.add_argument("--model-dim", type=int, default=64)
    tr.add_argument("--layers", type=int, default=2)
    tr.add_argument("--heads", type=int, default=2)
    tr.add_argument("--ff-dim", type=int, default=128)
    tr.set_defaults(func=_cmd_train_retriever)

    tc = subs.add_parser("train-classifier", help="train the emotion classifier")
    _add_common(tc)
    tc.add_argument("--corpus")
    tc.add_argument("--out", help="directory for classifier.ectf (usually the bundle)")
    tc.add_argument("--vectors", help="word-vector file (default: bundled mini table)")
    tc.add_argument("--epochs", type=int)
    tc.add_argument("--batch-size", type=int)
    tc.add_argument("--lr", type=float)
    tc.add_argument("--decay", type=float, default=1e-6)
    tc.add_argument("--filters", type=int, default=32)
    tc.add_argument("--seed", type=int)
    tc.add_argument("--split-seed", type=int)
    tc.set_defaults(func=_cmd_train_classifier)

    ev = subs.add_parser("eval", help="compute automatic metrics for a bundle")
    _add_common(ev)
    ev.add_argument("--bundle")
    ev.add_argument("--corpus")
    ev.add_argument("--p-at-n", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--split-seed", type=int)
    ev.add_argument("--report", help="write the machine-readable report here")
    ev.set_defaults(func=_cmd_eval)

    def add_engine_flags(sub: argparse.ArgumentParser) -> None:
        _add_common(sub)
        sub.add_argument("--bundle")
        sub.add_argument("--vectors")
        sub.add_argument("--emoji-map")
        sub.add_argument("--threshold", type=float)
        sub.add_argument("--sif-a", type=float)
        sub.add_argument("--no-principal", action="store_true")
        sub.add_argument("--session-dir")

    ch = subs.add_parser("chat", help="interactive terminal chat")
    add_engine_flags(ch)
    ch.set_defaults(func=_cmd_chat)

    sv = subs.add_parser("serve", help="run the HTTP chat service")
    add_engine_flags(sv)
    sv.add_argument("--static-dir", help="directory of web client assets to serve at /")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, help="default: $EMOTICHAT_PORT or 8000")
    sv.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
