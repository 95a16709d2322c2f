import json

import pytest
from fastapi.testclient import TestClient

from emotichat import default_emoji_map_path, default_word_vectors_path, sample_corpus_path
from emotichat import encoder as enc
from emotichat import retrieval as rtv
from emotichat.corpus import derive_pairs, parse_corpus
from emotichat.embeddings import load_word_vectors
from emotichat.emotion import CnnConfig, save_classifier, train_classifier
from emotichat.service import ChatEngine, EngineConfig, ServiceError, SessionStore, create_app
from emotichat.text import build_vocabulary, tokenize


@pytest.fixture(scope="module")
def sample_bundle(tmp_path_factory):
    """Retriever + classifier trained on the bundled sample corpus."""
    root = tmp_path_factory.mktemp("bundle")
    conversations = parse_corpus(sample_corpus_path().read_bytes())
    pairs = derive_pairs(conversations)
    tokens = [tokenize(p.context_text) + tokenize(p.response_text) for p in pairs]
    vocab = build_vocabulary(tokens, min_count=1)

    encoder_config = enc.EncoderConfig(
        kind="transformer", vocab_size=len(vocab), model_dim=16,
        layers=1, heads=2, feedforward_dim=32, max_len=60, seed=0,
    )
    ctx = enc.init_params(encoder_config)
    cand = enc.init_params(enc.EncoderConfig(**{**encoder_config.to_dict(), "seed": 1}))
    train_config = rtv.TrainConfig(epochs=30, batch_size=8, learning_rate=5e-3, seed=0)
    model, _ = rtv.train(pairs, ctx, cand, vocab, train_config)
    rtv.save_bundle(root, model, train_config=train_config, split_seed=0)

    table = load_word_vectors(default_word_vectors_path())
    labels = sorted({c.emotion for c in conversations})
    cnn_config = CnnConfig(
        embedding_dim=table.dimension, num_classes=len(labels),
        filters_per_width=8, epochs=2, batch_size=8, seed=0,
    )
    params, _ = train_classifier([(c.context, c.emotion) for c in conversations], cnn_config, table, labels)
    save_classifier(root / "classifier.ectf", params)
    return root


@pytest.fixture(scope="module")
def engine_config(sample_bundle, tmp_path_factory):
    return EngineConfig(
        bundle=str(sample_bundle),
        word_vectors=str(default_word_vectors_path()),
        emoji_map=str(default_emoji_map_path()),
        threshold=0.3,
        session_dir=str(tmp_path_factory.mktemp("sessions")),
    )


@pytest.fixture(scope="module")
def engine(engine_config):
    return ChatEngine.from_config(engine_config)


@pytest.fixture()
def client(engine):
    return TestClient(create_app(engine))


class TestEngine:
    def test_pipeline_fields(self, engine):
        session = engine.sessions.new_session()
        result = engine.handle_chat(session, "I just got the job I wanted!")
        assert result.reply_text
        assert result.emotion in engine.classifier.labels
        assert -1.0 <= result.similarity <= 1.0
        assert 0.0 < result.retrieval_probability <= 1.0
        if result.emoji is not None:
            assert result.similarity >= engine.threshold

    def test_history_alternates_and_stores_raw_reply(self, engine):
        session = engine.sessions.new_session()
        result = engine.handle_chat(session, "My dog passed away last weekend.")
        assert [e.author for e in session.history] == ["human", "bot"]
        bot = session.history[-1]
        assert bot.text == result.reply_text
        if result.emoji:
            assert bot.display_text == f"{result.reply_text} {result.emoji}"
        else:
            assert bot.display_text == result.reply_text

    def test_sessions_are_isolated_and_deterministic(self, engine):
        message = "I ran my first marathon today!"
        first = engine.handle_chat(engine.sessions.new_session(), message)
        second = engine.handle_chat(engine.sessions.new_session(), message)
        assert first.reply_text == second.reply_text
        assert first.emotion == second.emotion
        assert first.similarity == second.similarity

    def test_empty_message_rejected(self, engine):
        with pytest.raises(ValueError):
            engine.handle_chat(engine.sessions.new_session(), "   ")

    def test_high_threshold_suppresses_emoji(self, engine_config):
        config = EngineConfig(**{**engine_config.__dict__, "threshold": 1.1, "session_dir": None})
        strict = ChatEngine.from_config(config)
        for message in ("I am so happy today!", "That food was disgusting."):
            result = strict.handle_chat(strict.sessions.new_session(), message)
            assert result.emoji is None

    def test_missing_classifier_is_service_error(self, tmp_path, engine_config):
        config = EngineConfig(**{**engine_config.__dict__, "bundle": str(tmp_path)})
        with pytest.raises(ServiceError):
            ChatEngine.from_config(config)


class TestSessionStore:
    def test_persistence_survives_reload(self, tmp_path):
        store = SessionStore(tmp_path)
        session = store.new_session()
        from emotichat.service import HistoryEntry

        store.append(session, HistoryEntry("human", "hello", "hello", 1.0))
        store.append(session, HistoryEntry("bot", "hi", "hi 😀", 2.0, emotion="joy",
                                           similarity=0.8, probability=0.5))
        fresh = SessionStore(tmp_path)
        loaded = fresh.get(session.session_id)
        assert [e.author for e in loaded.history] == ["human", "bot"]
        assert loaded.history[1].display_text == "hi 😀"

    def test_unknown_id_gives_clean_session(self, tmp_path):
        store = SessionStore(tmp_path)
        session = store.get("nonexistent")
        assert session.history == []


class TestHttpApi:
    def test_chat_round_trip(self, client):
        response = client.post("/api/chat", json={"message": "I got the job I wanted!"})
        assert response.status_code == 200
        body = response.json()
        assert body["session_id"]
        assert body["reply"]
        assert body["emotion"]
        assert "similarity" in body and "probability" in body

    def test_session_continuity(self, client):
        first = client.post("/api/chat", json={"message": "hello there friend"}).json()
        sid = first["session_id"]
        client.post("/api/chat", json={"session_id": sid, "message": "tell me more please"})
        history = client.get(f"/api/session/{sid}").json()["history"]
        assert [e["author"] for e in history] == ["human", "bot", "human", "bot"]

    def test_empty_message_422(self, client):
        assert client.post("/api/chat", json={"message": "   "}).status_code == 422

    def test_missing_message_422(self, client):
        assert client.post("/api/chat", json={}).status_code == 422

    def test_unknown_session_empty_history(self, client):
        body = client.get("/api/session/doesnotexist").json()
        assert body["history"] == []

    def test_health(self, client, engine):
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["bundle_version"] == engine.bundle_version

    def test_static_mount(self, engine, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>chat</body></html>")
        app = create_app(engine, static_dir=tmp_path)
        client = TestClient(app)
        assert "chat" in client.get("/").text
        # API routes still take precedence
        assert client.get("/api/health").status_code == 200


class TestEngineConfigFile:
    def test_round_trip(self, tmp_path, engine_config):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "bundle": engine_config.bundle,
            "word_vectors": engine_config.word_vectors,
            "emoji_map": engine_config.emoji_map,
            "threshold": 0.25,
        }))
        config = EngineConfig.from_file(path)
        assert config.threshold == 0.25
        overridden = EngineConfig.from_file(path, threshold=0.9)
        assert overridden.threshold == 0.9

    def test_missing_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"threshold": 0.5}))
        with pytest.raises(ServiceError, match="missing"):
            EngineConfig.from_file(path)
