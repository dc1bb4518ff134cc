"""HTTP service exposing sessions, engines, ranking, routing, and feedback.

Long engine runs execute as background jobs (202 + progress events); every
mutation of one session is serialized behind that session's mutex, and a
second act while one is in flight is refused with 409. All durable state
is the canonical session export plus uploaded corpus files.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import StreamingResponse

from moose.core import InspirationCorpus, Stage, export_tree
from moose.errors import (
    BackendUnavailable,
    CorruptSession,
    EmptyCorpus,
    EmptyFeedback,
    EmptyQuestion,
    GatewayError,
    MalformedEntry,
    MooseError,
    SameStageRoute,
    ScoreUnavailable,
    UnknownCorpus,
    UnknownNode,
    UnknownSession,
)
from moose.explore import ExploreConfig
from moose.gateway import Gateway, HttpBackend, ScriptedBackend, ScriptEntry
from moose.protocol import (
    SessionState,
    apply_feedback,
    export_session,
    init_session,
    route,
    run_explore,
    run_refine,
    self_rank,
)
from moose.refine import RefineConfig
from moose.service.bus import EventBus
from moose.service.models import (
    ActAccepted,
    ActRequest,
    CorpusCreated,
    CreateSessionRequest,
    LlmConfigBody,
    RankingEntry,
    RankingResponse,
    SessionSummary,
)
from moose.service.storage import Store

logger = logging.getLogger(__name__)

ENV_DATA_DIR = "MOOSE_DATA_DIR"
ENV_LISTEN_ADDR = "MOOSE_LISTEN_ADDR"
DEFAULT_LISTEN_ADDR = "127.0.0.1:8040"

_STATUS_BY_ERROR: list[tuple[type[MooseError], int]] = [
    (EmptyQuestion, 400),
    (EmptyFeedback, 400),
    (EmptyCorpus, 400),
    (MalformedEntry, 400),
    (SameStageRoute, 400),
    (UnknownCorpus, 404),
    (UnknownSession, 404),
    (UnknownNode, 404),
    (CorruptSession, 500),
    (BackendUnavailable, 503),
    (ScoreUnavailable, 503),
    (GatewayError, 503),
]


def _raise_http(exc: MooseError) -> None:
    for error_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, error_type):
            raise HTTPException(status_code=status, detail=str(exc)) from exc
    raise HTTPException(status_code=400, detail=str(exc)) from exc


@dataclass
class SessionHandle:
    """One in-memory session plus its single-writer admission slot.

    Mutating operations must hold the writer slot; `act` refuses with 409
    when the slot is taken, while ranking queues behind it. Reads never
    need the slot because SessionState values are immutable snapshots.
    """

    session: SessionState
    gateway: Gateway | None = None
    llm_config: LlmConfigBody | None = None
    created_at: float = 0.0
    updated_at: float = 0.0
    _cond: threading.Condition = field(default_factory=threading.Condition)
    _busy: bool = False

    def try_acquire_writer(self) -> bool:
        with self._cond:
            if self._busy:
                return False
            self._busy = True
            return True

    def acquire_writer(self) -> None:
        with self._cond:
            while self._busy:
                self._cond.wait()
            self._busy = True

    def release_writer(self) -> None:
        with self._cond:
            self._busy = False
            self._cond.notify_all()

    def swap(self, session: SessionState, now: float) -> None:
        with self._cond:
            self.session = session
            self.updated_at = now


def tree_revision(session: SessionState) -> str:
    """Digest of the tree's structure and texts; scores are derived data."""
    import hashlib

    from moose.core import tree_document

    document = tree_document(session.tree)
    for record in document["nodes"]:
        record.pop("scores", None)
    return hashlib.sha256(
        json.dumps(document, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _default_backend_factory(config: LlmConfigBody | None):
    if config is not None and config.mode == "scripted":
        entries = [ScriptEntry(item.match, item.text) for item in (config.script or [])]
        return ScriptedBackend(entries)
    if config is not None:
        return HttpBackend(api_key=config.api_key, base_url=config.base_url,
                           model=config.model)
    return HttpBackend()


class Runtime:
    """Everything the route handlers share."""

    def __init__(self, store: Store, *, backend_factory=None,
                 explore_cfg: ExploreConfig | None = None,
                 refine_cfg: RefineConfig | None = None):
        self.store = store
        self.bus = EventBus()
        self.backend_factory = backend_factory or _default_backend_factory
        self.explore_cfg = explore_cfg or ExploreConfig()
        self.refine_cfg = refine_cfg or RefineConfig()
        self.handles: dict[str, SessionHandle] = {}
        self.jobs: dict[str, dict] = {}
        self.ranking_cache: dict[tuple[str, str, str], dict] = {}
        self._registry = threading.Lock()
        self._corpora: dict[str, InspirationCorpus] = {}

    def corpus(self, corpus_id: str) -> InspirationCorpus:
        if corpus_id not in self._corpora:
            self._corpora[corpus_id] = self.store.load_corpus(corpus_id)
        return self._corpora[corpus_id]

    def handle(self, session_id: str) -> SessionHandle:
        with self._registry:
            if session_id not in self.handles:
                session = self.store.load_session(session_id)
                self.handles[session_id] = SessionHandle(session=session)
            return self.handles[session_id]

    def register(self, session: SessionState, *, config: LlmConfigBody | None,
                 now: float) -> SessionHandle:
        handle = SessionHandle(session=session, llm_config=config,
                               created_at=now, updated_at=now)
        with self._registry:
            self.handles[session.session_id] = handle
        return handle

    def gateway_for(self, handle: SessionHandle) -> Gateway:
        if handle.gateway is None:
            handle.gateway = Gateway(self.backend_factory(handle.llm_config))
        return handle.gateway

    def summary(self, handle: SessionHandle) -> SessionSummary:
        session = handle.session
        return SessionSummary(
            session_id=session.session_id,
            question=session.base_context.question,
            node_count=len(session.tree.nodes),
            active=session.tree.active,
            stage_of_active=session.stage_of_active.value,
            created_at=handle.created_at,
            updated_at=handle.updated_at,
        )


def create_app(data_dir: str | Path | None = None, *, backend_factory=None,
               explore_cfg: ExploreConfig | None = None,
               refine_cfg: RefineConfig | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    import time as _time

    store = Store(data_dir or os.environ.get(ENV_DATA_DIR, "./moose_data"))
    runtime = Runtime(store, backend_factory=backend_factory,
                      explore_cfg=explore_cfg, refine_cfg=refine_cfg)
    app = FastAPI(title="moose", version="0.1.0")
    app.state.runtime = runtime

    # --- corpora ------------------------------------------------------------

    @app.post("/corpora", response_model=CorpusCreated, status_code=201)
    async def upload_corpus(request: Request):
        raw = await request.body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"not UTF-8: {exc}")
        try:
            corpus_id, corpus = store.save_corpus(text)
        except MooseError as exc:
            _raise_http(exc)
        runtime._corpora[corpus_id] = corpus
        return CorpusCreated(corpus_id=corpus_id, entries=len(corpus))

    # --- sessions -----------------------------------------------------------

    @app.post("/sessions", response_model=SessionSummary, status_code=201)
    def create_session(body: CreateSessionRequest):
        if not store.has_corpus(body.corpus_id):
            raise HTTPException(status_code=404,
                                detail=f"no corpus {body.corpus_id!r}")
        corpus = runtime.corpus(body.corpus_id)
        try:
            session = init_session(body.question, body.survey, body.blueprint,
                                   corpus, session_id=uuid.uuid4().hex[:12])
        except MooseError as exc:
            _raise_http(exc)
        store.save_session(session)
        handle = runtime.register(session, config=body.llm_config,
                                  now=_time.time())
        return runtime.summary(handle)

    @app.get("/sessions", response_model=list[SessionSummary])
    def list_sessions():
        summaries = []
        for session_id in store.list_session_ids():
            try:
                summaries.append(runtime.summary(runtime.handle(session_id)))
            except CorruptSession as exc:
                logger.warning("skipping corrupt session %s: %s", session_id, exc)
        return summaries

    def _get_handle(session_id: str) -> SessionHandle:
        try:
            return runtime.handle(session_id)
        except MooseError as exc:
            _raise_http(exc)

    @app.get("/sessions/{session_id}/tree")
    def get_tree(session_id: str):
        handle = _get_handle(session_id)
        return Response(content=export_tree(handle.session.tree),
                        media_type="application/json")

    @app.get("/sessions/{session_id}/export")
    def get_export(session_id: str):
        handle = _get_handle(session_id)
        return Response(content=export_session(handle.session),
                        media_type="application/json")

    # --- ranking ------------------------------------------------------------

    @app.get("/sessions/{session_id}/ranking", response_model=RankingResponse)
    def get_ranking(session_id: str,
                    scope: str = Query(default="leaves", pattern="^(leaves|all)$")):
        handle = _get_handle(session_id)
        handle.acquire_writer()  # queue behind any in-flight run
        try:
            session = handle.session
            revision = tree_revision(session)
            key = (session_id, scope, revision)
            if key in runtime.ranking_cache:
                return runtime.ranking_cache[key]
            if scope == "leaves":
                candidates = [node.id for node in session.tree.leaves()]
            else:
                candidates = sorted(session.tree.nodes)
            try:
                gateway = runtime.gateway_for(handle)
                session, ranked = self_rank(session, candidates, gateway)
            except MooseError as exc:
                _raise_http(exc)
            handle.swap(session, _time.time())
            store.save_session(session)
            runtime.bus.emit(session_id, "ScoreReady",
                             {"scope": scope, "count": len(ranked)})
            response = RankingResponse(
                scope=scope, tree_revision=revision,
                ranking=[RankingEntry(node=node_id,
                                      scores=score.to_dict() if score else None)
                         for node_id, score in ranked],
            ).model_dump()
            runtime.ranking_cache[key] = response
            return response
        finally:
            handle.release_writer()

    # --- act + jobs -----------------------------------------------------------

    def _run_job(job_id: str, session_id: str, handle: SessionHandle,
                 target_node: str, action: str) -> None:
        # inherits the writer slot acquired by act()
        try:
            runtime.bus.emit(session_id, "GenerationStarted",
                             {"job_id": job_id, "action": action,
                              "node": target_node})
            gateway = runtime.gateway_for(handle)
            corpus = runtime.corpus(handle.session.corpus_ref)
            before = set(handle.session.tree.nodes)
            if action == "explore":
                session, _ = run_explore(handle.session, corpus,
                                         runtime.explore_cfg, gateway,
                                         node=target_node)
            else:
                session, _ = run_refine(handle.session, runtime.refine_cfg,
                                        gateway, node=target_node,
                                        corpus=corpus)
            handle.swap(session, _time.time())
            store.save_session(session)
            for node_id in sorted(set(session.tree.nodes) - before):
                runtime.bus.emit(session_id, "NodeAdded",
                                 {"node": session.tree.node(node_id).to_dict()})
            runtime.bus.emit(session_id, "RunCompleted",
                             {"job_id": job_id, "action": action})
            runtime.jobs[job_id] = {"status": "done", "session_id": session_id}
        except Exception as exc:
            partial = getattr(exc, "session", None)
            if partial is not None:
                handle.swap(partial, _time.time())
                store.save_session(partial)
            runtime.bus.emit(session_id, "Error",
                             {"job_id": job_id, "message": str(exc)})
            runtime.jobs[job_id] = {"status": "failed",
                                    "session_id": session_id,
                                    "error": str(exc)}
        finally:
            handle.release_writer()

    @app.post("/sessions/{session_id}/act", response_model=ActAccepted,
              status_code=202)
    def act(session_id: str, body: ActRequest):
        handle = _get_handle(session_id)
        if not handle.try_acquire_writer():
            raise HTTPException(status_code=409,
                                detail="a run is already in flight")
        try:
            session = handle.session
            node = session.tree.node(body.node)
            target_stage = (Stage.FINE_GRAINED if body.next == "refine"
                            else Stage.EXPLORATORY)
            # a node already at the target stage cannot be routed there; the
            # session must be in that stage already or no legal move exists
            if (target_stage is node.stage
                    and session.stage_of_active is not target_stage):
                raise HTTPException(
                    status_code=400,
                    detail=(f"session is in the {session.stage_of_active.value} "
                            f"stage; route a {session.stage_of_active.value} "
                            "node across stages instead"))
            if body.feedback is not None:
                session = apply_feedback(session, body.node, body.feedback)
            if target_stage is not node.stage:
                session = route(session, body.node, target_stage)
            handle.swap(session, _time.time())
            store.save_session(session)
        except MooseError as exc:
            handle.release_writer()
            _raise_http(exc)
        except BaseException:
            handle.release_writer()
            raise
        job_id = uuid.uuid4().hex[:12]
        runtime.jobs[job_id] = {"status": "running", "session_id": session_id}
        worker = threading.Thread(
            target=_run_job,
            args=(job_id, session_id, handle, body.node, body.next),
            daemon=True,
        )
        worker.start()
        return ActAccepted(job_id=job_id)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        if job_id not in runtime.jobs:
            raise HTTPException(status_code=404, detail=f"no job {job_id!r}")
        return runtime.jobs[job_id]

    # --- progress events -------------------------------------------------------

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, after: int = -1, follow: bool = True):
        _get_handle(session_id)

        def sse():
            for event in runtime.bus.stream(session_id, after, follow=follow):
                data = json.dumps(event.to_dict(), ensure_ascii=False)
                yield f"id: {event.seq}\nevent: {event.kind}\ndata: {data}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    # --- static UI --------------------------------------------------------------

    resolved_ui = Path(ui_dir) if ui_dir else Path(
        os.environ.get("MOOSE_UI_DIR", "frontend/dist"))
    if resolved_ui.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=resolved_ui, html=True), name="ui")

    return app
