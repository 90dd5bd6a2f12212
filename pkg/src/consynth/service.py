"""Live active-learning sessions over a local HTTP/JSON API.

One engine Session per service session; answers are serialized by a
per-session lock (the loop is inherently sequential).  The loop advance after
an answer runs on a worker thread; reads during that window see status
"selecting" with progress.
"""
from __future__ import annotations

import threading
import uuid
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .harness import RunConfig, build_env
from .learning import Session, SessionConfig
from .values import sorted_values


class CreateSessionRequest(BaseModel):
    domain: str = "demo"                # demo | visarith | objextract
    benchmark: Optional[str] = None
    seed: int = 0
    strategy: str = "worstcase"
    delta: float = 0.1
    forced_coverage: bool = True
    k: Optional[int] = 1
    kprime: float = 1.0
    input_count: Optional[int] = None


class AnswerRequest(BaseModel):
    token: str
    answer: object = None


class LiveSession:
    def __init__(self, sid: str, session: Session, plugin, oracle_hint=None):
        self.sid = sid
        self.session = session
        self.plugin = plugin
        self.lock = threading.Lock()
        self.question_token: Optional[str] = None
        self.computing = False
        self.error: Optional[str] = None

    def status(self) -> str:
        if self.computing:
            return "selecting"
        if self.session.pending is not None:
            return "awaiting_answer"
        if self.session.status in ("converged", "exhausted"):
            return "converged"
        if self.session.status == "running":
            return "selecting"
        return "failed"

    def advance(self):
        self.computing = True
        try:
            q = self.session.next_question()
            self.question_token = str(uuid.uuid4()) if q is not None else None
        finally:
            self.computing = False


def _answer_value(session: Session, raw):
    """JSON answers arrive as lists/ints/bools; object sets become frozensets."""
    if isinstance(raw, list):
        return frozenset(raw)
    return raw


def serialize_value(v):
    if isinstance(v, frozenset):
        return sorted(serialize_value(x) for x in v)
    if isinstance(v, tuple):
        return [serialize_value(x) for x in v]
    return v


def create_app() -> FastAPI:
    app = FastAPI(title="consynth session service")
    sessions: dict[str, LiveSession] = {}

    def get_live(sid: str) -> LiveSession:
        live = sessions.get(sid)
        if live is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return live

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            live = _build_session(req)
        except KeyError as e:
            raise HTTPException(status_code=400, detail=f"bad config: {e}")
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        sessions[live.sid] = live
        live.advance()
        return _state_payload(live)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _state_payload(get_live(sid))

    @app.get("/sessions/{sid}/question")
    def get_question(sid: str):
        live = get_live(sid)
        if live.computing:
            return JSONResponse({"status": "selecting", "progress": live.session.progress})
        if live.session.pending is None:
            raise HTTPException(status_code=409, detail="no pending question")
        return _question_payload(live)

    @app.post("/sessions/{sid}/answer")
    def post_answer(sid: str, req: AnswerRequest):
        live = get_live(sid)
        if not live.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="answer already in flight")
        try:
            if live.session.pending is None:
                raise HTTPException(status_code=409, detail="no pending question")
            if req.token != live.question_token:
                raise HTTPException(status_code=409, detail="stale question token")
            q = live.session.pending
            answer = _answer_value(live.session, req.answer)
            choices = _choices(live)
            if choices is not None and answer not in choices:
                raise HTTPException(status_code=422, detail="answer outside offered choices")
            if not _schema_ok(live, q, answer):
                raise HTTPException(status_code=400, detail="answer does not match schema")
            hs_before = len(live.session.hs)
            live.session.submit(answer)
            live.advance()
            payload = _state_payload(live)
            payload["hs_delta"] = {"before": hs_before, "after": len(live.session.hs)}
            return payload
        finally:
            live.lock.release()

    @app.get("/sessions/{sid}/transcript")
    def get_transcript(sid: str):
        live = get_live(sid)
        return live.session.transcript.to_dict()

    @app.get("/sessions/{sid}/hypotheses")
    def get_hypotheses(sid: str, offset: int = 0, limit: int = 20):
        live = get_live(sid)
        progs = sorted(p.key() for p in live.session.hs.programs)
        return {
            "count": len(progs),
            "offset": offset,
            "items": progs[offset:offset + limit],
        }

    def _choices(live: LiveSession):
        q = live.session.pending
        if q is None:
            return None
        if q.is_io:
            return None  # free-form output per the answer schema
        return live.session.engine.constrained_labels(q.target, q.key, live.session.store)

    def _schema_ok(live, q, answer) -> bool:
        if q.is_io:
            out = live.plugin.render_question(q, live.session.engine.inputs[q.input_id])
            schema = out.get("answer_schema")
            if schema == "integer":
                return isinstance(answer, int) and not isinstance(answer, bool)
            if schema == "object_set":
                return isinstance(answer, frozenset)
            return True
        return True

    def _question_payload(live: LiveSession) -> dict:
        q = live.session.pending
        dom_input = live.session.engine.inputs[q.input_id]
        rendered = live.plugin.render_question(q, dom_input)
        choices = _choices(live)
        return {
            "token": live.question_token,
            "target": q.target,
            "key": q.key,
            "input_id": q.input_id,
            "render": rendered,
            "choices": None if choices is None else [serialize_value(c) for c in choices],
        }

    def _state_payload(live: LiveSession) -> dict:
        sess = live.session
        payload = {
            "session_id": live.sid,
            "status": live.status(),
            "hs_count": len(sess.hs),
            "rounds": sess.round_index,
            "progress": sess.progress,
            "examples": [p.key() for p in sorted(sess.hs.programs, key=lambda p: p.key())[:5]],
        }
        if sess.pending is not None and not live.computing:
            payload["question"] = _question_payload(live)
        if live.status() == "converged":
            payload["program"] = sess.transcript.program
            payload["survivors"] = sess.transcript.survivors
        return payload

    app.state.sessions = sessions
    _mount_ui(app)
    return app


def _mount_ui(app: FastAPI):
    """Serve the labeler frontend when its build output exists."""
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent.parent / "frontend"
    if (root / "dist").is_dir():
        from fastapi.staticfiles import StaticFiles
        from fastapi.responses import FileResponse

        app.mount("/dist", StaticFiles(directory=root / "dist"), name="dist")

        @app.get("/ui")
        def ui_index():
            return FileResponse(root / "index.html")


def _build_session(req: CreateSessionRequest) -> LiveSession:
    sid = str(uuid.uuid4())
    if req.domain == "demo":
        from .fixtures import overview_fixture

        fx = overview_fixture()
        cfg = SessionConfig(seed=req.seed, strategy=req.strategy, k=req.k, kprime=req.kprime)
        session = Session(fx.plugin, fx.suite, fx.hs, [fx.dom_input], fx.examples, cfg)
        return LiveSession(sid, session, fx.plugin)
    if req.domain not in ("visarith", "objextract"):
        raise ValueError(f"unknown domain {req.domain!r}")
    if req.benchmark is None:
        raise ValueError("benchmark required for non-demo domains")
    run_cfg = RunConfig(domain=req.domain, strategy=req.strategy, delta=req.delta,
                        forced_coverage=req.forced_coverage, k=req.k, kprime=req.kprime,
                        input_count=req.input_count, seeds=(req.seed,))
    env = build_env(req.domain, req.benchmark, req.seed, run_cfg)
    cfg = SessionConfig(seed=req.seed, strategy=req.strategy, k=req.k, kprime=req.kprime)
    session = Session(env.plugin, env.suite, env.hs, env.inputs, env.examples, cfg,
                      memo=env.memo)
    return LiveSession(sid, session, env.plugin)


app = create_app()
