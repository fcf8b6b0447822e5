"""Operational shell: persistent service state and the HTTP gateway.

One ServiceState owns the graph, the review queue, the chunk store, and
live sessions; both the HTTP app and the CLI run through it, so the two
paths cannot drift. Mutations are write-through: the graph snapshot is
rewritten atomically after every change and the review log is append-only,
which makes a restart a pure replay.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig
from .curation import ReviewQueue, Verdict
from .engine import DiagnosticQuery, diagnose
from .errors import (
    AlreadyDecided,
    ConfigError,
    EmptyResults,
    GraphNotLoaded,
    KgTriageError,
    RevisionConflict,
    RosterError,
    UnexpectedSymptom,
    UnknownEntity,
    UnknownReviewItem,
    UnknownSession,
    WrongState,
)
from .graph import Category, KnowledgeGraph
from .ingest import Document, Lexicon, ingest_corpus, load_patterns
from .sessions import Session, normalize_symptoms

log = logging.getLogger(__name__)

GRAPH_FILE = "graph.json"
REVIEW_LOG = "review-log.jsonl"
CHUNKS_FILE = "chunks.jsonl"
SESSION_LOG = "sessions.jsonl"


def canonical_json(doc: dict) -> bytes:
    """Stable JSON rendering shared by the CLI and the HTTP surface."""
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


class ServiceState:
    """Everything the gateway needs, rebuilt from the data directory."""

    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        self.data_dir = Path(config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.lexicon = Lexicon.from_file(config.lexicon)
        self.patterns = load_patterns(config.patterns)
        self.roster = config.roster()
        self.engine_config = config.engine_config()
        self.sessions: dict[str, Session] = {}
        self.chunk_texts: dict[str, str] = {}
        self.load_error: str | None = None
        self._session_seq = 1
        self._lock = threading.RLock()

        graph_path = self.data_dir / GRAPH_FILE
        try:
            if graph_path.exists():
                self.graph: KnowledgeGraph | None = KnowledgeGraph.load(
                    graph_path.read_bytes()
                )
            else:
                self.graph = KnowledgeGraph()
        except KgTriageError as exc:
            log.error("cannot load graph from %s: %s", graph_path, exc)
            self.graph = None
            self.load_error = str(exc)
            self.queue = None
            return

        self.queue = ReviewQueue.replay(self.graph, self.data_dir / REVIEW_LOG)
        chunks_path = self.data_dir / CHUNKS_FILE
        if chunks_path.exists():
            for line in chunks_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = json.loads(line)
                    self.chunk_texts[record["chunk_id"]] = record["text"]
        self.save_graph()

    # -- persistence ---------------------------------------------------------

    def require_graph(self) -> KnowledgeGraph:
        if self.graph is None:
            raise GraphNotLoaded(self.load_error or "graph not loaded")
        return self.graph

    def save_graph(self) -> None:
        graph = self.require_graph()
        target = self.data_dir / GRAPH_FILE
        tmp = target.with_suffix(".json.tmp")
        tmp.write_bytes(graph.snapshot())
        os.replace(tmp, target)

    def _append_chunks(self, chunks: dict[str, str]) -> None:
        if not chunks:
            return
        with (self.data_dir / CHUNKS_FILE).open("a", encoding="utf-8") as fh:
            for chunk_id, text in chunks.items():
                fh.write(json.dumps({"chunk_id": chunk_id, "text": text}, ensure_ascii=False) + "\n")

    def _log_session_event(self, session_id: str, action: str, payload: dict) -> None:
        record = {"ts": time.time(), "session_id": session_id, "action": action, **payload}
        with (self.data_dir / SESSION_LOG).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    # -- operations ------------------------------------------------------------

    def ingest(self, docs: list[Document]) -> dict:
        graph = self.require_graph()
        with self._lock:
            fresh_chunks: dict[str, str] = {}
            report = ingest_corpus(
                docs,
                self.lexicon,
                self.patterns,
                graph,
                augmenter_endpoint=self.config.augmenter_endpoint,
                chunk_sink=fresh_chunks,
                augmenter_timeout=self.config.augmenter_timeout,
            )
            new_chunks = {k: v for k, v in fresh_chunks.items() if k not in self.chunk_texts}
            self.chunk_texts.update(fresh_chunks)
            self._append_chunks(new_chunks)
            self.queue.enqueue(
                rel
                for rel in graph.relations.values()
                if rel.status.value == "pending-review"
            )
            self.save_graph()
        return report.to_doc()

    def diagnose_once(self, symptoms: list[str] | None, text: str | None) -> dict:
        graph = self.require_graph()
        symptom_ids: set[str] = set()
        if text:
            symptom_ids |= normalize_symptoms(text, self.lexicon, graph)
        for token in symptoms or []:
            resolved = graph.resolve(token)
            if resolved and graph.entities[resolved].category is Category.SYMPTOM:
                symptom_ids.add(resolved)
        query = DiagnosticQuery(query_id="oneshot", raw_text=text or "", symptom_ids=symptom_ids)
        outcome = diagnose(query, self.engine_config, self.roster, graph)
        doc = outcome.to_doc()
        doc["symptom_ids"] = sorted(symptom_ids)
        return doc

    def start_session(self, text: str) -> Session:
        graph = self.require_graph()
        with self._lock:
            session_id = f"s-{self._session_seq:06d}-{uuid.uuid4().hex[:6]}"
            self._session_seq += 1
        session = Session(
            session_id,
            text,
            graph,
            self.lexicon,
            self.engine_config,
            self.roster,
            max_questions=self.config.max_clarifying_questions,
        )
        with self._lock:
            self.sessions[session_id] = session
        self._log_session_event(session_id, "start", {"text": text})
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return session

    def answer(self, session_id: str, symptom_id: str, present: bool) -> Session:
        session = self.get_session(session_id)
        session.answer(symptom_id, present)
        self._log_session_event(
            session_id, "answer", {"symptom_id": symptom_id, "present": present}
        )
        return session

    def review_queue_docs(self) -> list[dict]:
        graph = self.require_graph()
        docs = []
        for item in self.queue.pending():
            triple = graph.relations[item.relation_id]
            doc = item.to_doc(triple)
            doc["source_chunk_text"] = self.chunk_texts.get(triple.source_chunk or "")
            docs.append(doc)
        return docs

    def review_verdict(
        self,
        item_id: str,
        verdict: str,
        reviewer: str,
        expected_revision: int,
        note: str | None = None,
    ) -> dict:
        graph = self.require_graph()
        try:
            verdict_enum = Verdict(verdict)
        except ValueError as exc:
            raise KgTriageError(f"verdict must be approve or reject, got {verdict!r}") from exc
        with self._lock:
            item = self.queue.review(item_id, verdict_enum, reviewer, expected_revision, note)
            self.save_graph()
        return item.to_doc(graph.relations[item.relation_id])

    def export_bytes(self) -> bytes:
        return self.require_graph().snapshot()


# --- HTTP surface -------------------------------------------------------------


class SessionStart(BaseModel):
    text: str


class SessionAnswer(BaseModel):
    symptom_id: str
    present: bool
    idempotency_key: str | None = None


class IngestDocument(BaseModel):
    id: str
    text: str
    source: str = ""


class IngestRequest(BaseModel):
    documents: list[IngestDocument]


class VerdictRequest(BaseModel):
    verdict: str
    reviewer: str
    expected_revision: int
    note: str | None = None


class DiagnoseRequest(BaseModel):
    symptoms: list[str] | None = None
    text: str | None = None


_STATUS_FOR_ERROR: list[tuple[type[Exception], int]] = [
    (GraphNotLoaded, 503),
    (UnknownSession, 404),
    (UnknownReviewItem, 404),
    (UnknownEntity, 404),
    (RevisionConflict, 409),
    (AlreadyDecided, 409),
    (WrongState, 409),
    (UnexpectedSymptom, 400),
    (EmptyResults, 400),
    (RosterError, 500),
    (ConfigError, 500),
]


def _http_status(exc: KgTriageError) -> int:
    for klass, status in _STATUS_FOR_ERROR:
        if isinstance(exc, klass):
            return status
    return 400


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="kgtriage gateway")
    answers_seen: dict[tuple[str, str], dict] = {}

    @app.exception_handler(KgTriageError)
    async def _domain_error(_req: Request, exc: KgTriageError) -> JSONResponse:
        return JSONResponse(
            status_code=_http_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/healthz")
    def healthz() -> dict:
        graph = state.require_graph()
        return {"status": "ok", "graph_version": graph.version}

    @app.post("/sessions", status_code=201)
    def start_session(body: SessionStart) -> dict:
        return state.start_session(body.text).to_doc()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return state.get_session(session_id).to_doc()

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, body: SessionAnswer) -> dict:
        if body.idempotency_key:
            cached = answers_seen.get((session_id, body.idempotency_key))
            if cached is not None:
                return cached
        doc = state.answer(session_id, body.symptom_id, body.present).to_doc()
        if body.idempotency_key:
            answers_seen[(session_id, body.idempotency_key)] = doc
        return doc

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str) -> dict:
        return state.get_session(session_id).close().to_doc()

    @app.post("/ingest")
    def ingest(body: IngestRequest) -> dict:
        docs = [Document(d.id, d.text, d.source) for d in body.documents]
        return state.ingest(docs)

    @app.get("/graph/export")
    def export_graph() -> Response:
        return Response(content=state.export_bytes(), media_type="application/json")

    @app.get("/review/queue")
    def review_queue() -> dict:
        return {"items": state.review_queue_docs()}

    @app.post("/review/{item_id}/verdict")
    def review_verdict(item_id: str, body: VerdictRequest) -> dict:
        return state.review_verdict(
            item_id, body.verdict, body.reviewer, body.expected_revision, body.note
        )

    @app.post("/diagnose")
    def diagnose_once(body: DiagnoseRequest) -> Response:
        if not body.symptoms and not body.text:
            raise HTTPException(status_code=400, detail="symptoms or text required")
        doc = state.diagnose_once(body.symptoms, body.text)
        return Response(content=canonical_json(doc), media_type="application/json")

    console_dist = os.environ.get("KGTRIAGE_CONSOLE_DIST", "frontend/dist")
    if Path(console_dist).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dist, html=True), name="console")

    return app
