"""Chat engine, session store, and HTTP API.

A chat turn runs the full pipeline in order: append the human message to
the session, retrieve the best response over the whole session history,
classify the emotion of the retrieved text, pick the emotion bucket's
most similar emoji, and attach it when it clears the threshold. Sessions
are persisted as append-only JSONL logs so a restarted service resumes
every transcript.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel

from .embeddings import (
    DEFAULT_SIF_A,
    EmbeddingError,
    WordVectorTable,
    fit_principal_component,
    load_word_vectors,
    sif_embed,
)
from .emoji import DEFAULT_THRESHOLD, EmojiMap, append_emoji, load_emoji_map, select_emoji
from .emotion import CnnParams, load_classifier, predict_emotion
from .retrieval import RetrievalModel, load_bundle, retrieve
from .text import tokenize


class ServiceError(RuntimeError):
    pass


@dataclass
class HistoryEntry:
    author: str  # "human" or "bot"
    text: str
    display_text: str
    timestamp: float
    emoji: str | None = None
    emotion: str | None = None
    similarity: float | None = None
    probability: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HistoryEntry":
        return cls(**data)


@dataclass
class ChatSession:
    session_id: str
    history: list[HistoryEntry] = field(default_factory=list)
    created: float = field(default_factory=time.time)
    last_active: float = field(default_factory=time.time)


@dataclass
class ChatResponse:
    reply_text: str
    emoji: str | None
    emotion: str
    similarity: float
    retrieval_probability: float


class SessionStore:
    """Per-session append-only JSONL logs with per-session locks."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, ChatSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _path(self, session_id: str) -> Path | None:
        return self.directory / f"{session_id}.jsonl" if self.directory else None

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def new_session(self) -> ChatSession:
        session = ChatSession(session_id=uuid.uuid4().hex[:12])
        with self._guard:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> ChatSession:
        """Return the session, replaying its log if needed; unknown ids
        yield a clean empty session under that id."""
        with self._guard:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = ChatSession(session_id=session_id)
        path = self._path(session_id)
        if path and path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    session.history.append(HistoryEntry.from_dict(json.loads(line)))
        with self._guard:
            return self._sessions.setdefault(session_id, session)

    def append(self, session: ChatSession, entry: HistoryEntry) -> None:
        session.history.append(entry)
        session.last_active = entry.timestamp
        path = self._path(session.session_id)
        if path:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


@dataclass
class EngineConfig:
    bundle: str
    word_vectors: str
    emoji_map: str
    threshold: float = DEFAULT_THRESHOLD
    sif_a: float = DEFAULT_SIF_A
    use_principal: bool = True
    session_dir: str | None = None
    static_dir: str | None = None

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "EngineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ServiceError(f"cannot read config file {path}: {exc}") from None
        known = {f for f in cls.__dataclass_fields__}
        merged = {k: v for k, v in data.items() if k in known}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        missing = [k for k in ("bundle", "word_vectors", "emoji_map") if not merged.get(k)]
        if missing:
            raise ServiceError(f"config is missing required keys: {missing}")
        return cls(**merged)


class ChatEngine:
    """Loads every artifact once and serves chat turns from them."""

    def __init__(
        self,
        model: RetrievalModel,
        classifier: CnnParams,
        table: WordVectorTable,
        emoji_map: EmojiMap,
        bundle_version: str = "unversioned",
        threshold: float = DEFAULT_THRESHOLD,
        sif_a: float = DEFAULT_SIF_A,
        use_principal: bool = True,
        session_store: SessionStore | None = None,
    ) -> None:
        self.model = model
        self.classifier = classifier
        self.table = table
        self.emoji_map = emoji_map
        self.bundle_version = bundle_version
        self.threshold = threshold
        self.sif_a = sif_a
        self.sessions = session_store or SessionStore()
        self._freqs = dict(model.vocab.frequencies)
        self.principal = self._fit_principal() if use_principal else None

    def _fit_principal(self) -> Optional[np.ndarray]:
        """Shared direction of the candidate responses' sentence vectors,
        fitted once over the pool; skipped when the pool is degenerate."""
        vectors = []
        for response in self.model.pool.responses:
            sv = sif_embed(tokenize(response), self.table, self._freqs, a=self.sif_a)
            if np.any(sv.vector):
                vectors.append(sv.vector)
        try:
            return fit_principal_component(vectors)
        except EmbeddingError:
            return None

    @classmethod
    def from_config(cls, config: EngineConfig) -> "ChatEngine":
        bundle_path = Path(config.bundle)
        classifier_path = bundle_path / "classifier.ectf"
        if not classifier_path.exists():
            raise ServiceError(
                f"{bundle_path}: no classifier.ectf; run `emotichat train-classifier` first"
            )
        try:
            model, manifest = load_bundle(bundle_path)
            classifier = load_classifier(classifier_path)
            table = load_word_vectors(config.word_vectors)
            emoji_map = load_emoji_map(config.emoji_map, table, labels=classifier.labels)
        except (OSError, ValueError) as exc:
            raise ServiceError(f"failed to load artifacts: {exc}") from exc
        return cls(
            model=model,
            classifier=classifier,
            table=table,
            emoji_map=emoji_map,
            bundle_version=manifest.get("bundle_version", "unversioned"),
            threshold=config.threshold,
            sif_a=config.sif_a,
            use_principal=config.use_principal,
            session_store=SessionStore(config.session_dir),
        )

    def _context_text(self, session: ChatSession) -> str:
        joiner = f" {self.model.vocab.separator} "
        return joiner.join(entry.text for entry in session.history)

    def handle_chat(self, session: ChatSession, message: str) -> ChatResponse:
        """Run one full pipeline turn inside the session's lock."""
        message = message.strip()
        if not message:
            raise ValueError("message must not be empty")
        with self.sessions.lock(session.session_id):
            now = time.time()
            self.sessions.append(
                session,
                HistoryEntry(author="human", text=message, display_text=message, timestamp=now),
            )
            reply, probability = retrieve(self.model, self._context_text(session), k=1)[0]
            emotion, _ = predict_emotion(self.classifier, reply)
            choice = select_emoji(
                reply, emotion, self.emoji_map, self.table, self._freqs,
                threshold=self.threshold, sif_a=self.sif_a, principal=self.principal,
            )
            display = append_emoji(reply, choice)
            self.sessions.append(
                session,
                HistoryEntry(
                    author="bot", text=reply, display_text=display, timestamp=time.time(),
                    emoji=choice.emoji, emotion=emotion,
                    similarity=choice.similarity, probability=probability,
                ),
            )
            return ChatResponse(
                reply_text=reply,
                emoji=choice.emoji,
                emotion=emotion,
                similarity=choice.similarity,
                retrieval_probability=probability,
            )


class ChatRequest(BaseModel):
    session_id: Optional[str] = None
    message: str


class ChatReply(BaseModel):
    session_id: str
    reply: str
    emoji: Optional[str] = None
    emotion: str
    similarity: float
    probability: float


def create_app(engine: ChatEngine, static_dir: str | Path | None = None):
    """FastAPI application exposing the chat, health, and session routes.

    CORS is wide open: the API is unauthenticated and session-scoped, and
    the web client may be served from a different origin during development.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="emotichat", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/api/chat", response_model=ChatReply)
    def chat(request: ChatRequest) -> ChatReply:
        if engine is None:
            raise HTTPException(status_code=503, detail="model artifacts are not loaded")
        if not request.message.strip():
            raise HTTPException(status_code=422, detail="message must not be empty")
        session = engine.sessions.get(request.session_id) if request.session_id else engine.sessions.new_session()
        result = engine.handle_chat(session, request.message)
        return ChatReply(
            session_id=session.session_id,
            reply=result.reply_text,
            emoji=result.emoji,
            emotion=result.emotion,
            similarity=result.similarity,
            probability=result.retrieval_probability,
        )

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "bundle_version": engine.bundle_version}

    @app.get("/api/session/{session_id}")
    def session_history(session_id: str) -> dict:
        session = engine.sessions.get(session_id)
        return {
            "session_id": session.session_id,
            "history": [entry.to_dict() for entry in session.history],
        }

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="webui")
    return app
