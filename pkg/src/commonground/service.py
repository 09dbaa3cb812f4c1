"""HTTP + server-sent-events front end for live reconciliation sessions.

Commands are plain JSON POSTs; the UI only ever reacts to the one-directional
event stream, so every mutation pushes exactly one frame carrying the full
state snapshot. Errors share the shape {code, message, detail}.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .errors import (
    ClarificationNeeded,
    CommonGroundError,
    PhaseError,
    ScenarioError,
    UnparseableQueryError,
)
from .scene import BaseMove
from .scenario import packaged_scenario_dir
from .session import EngineConfig, Session, open_session


@dataclass
class ServiceConfig:
    scenario_dir: Path = field(default_factory=packaged_scenario_dir)
    engine: EngineConfig = field(default_factory=EngineConfig)
    ui_dir: Optional[Path] = None


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Optional[Session]:
        with self._lock:
            return self._sessions.get(session_id)


class QueryBody(BaseModel):
    text: str


class RebuttalBody(BaseModel):
    text: str


class EePoseBody(BaseModel):
    pose: list[float]


class MoveBody(BaseModel):
    delta: Optional[list[float]] = None
    dtheta: float = 0.0


class CreateSessionBody(BaseModel):
    scenario: str


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="commonground", version="0.1.0")
    store = SessionStore()
    app.state.config = config
    app.state.sessions = store

    @app.exception_handler(CommonGroundError)
    def _handle_engine_error(request: Request, exc: CommonGroundError):
        if isinstance(exc, PhaseError):
            return _error(409, "phase_violation", str(exc))
        if isinstance(exc, ClarificationNeeded):
            return _error(422, "clarification_needed", exc.message)
        if isinstance(exc, UnparseableQueryError):
            return _error(422, "unparseable_query", str(exc))
        if isinstance(exc, ScenarioError):
            return _error(422, "scenario_error", str(exc))
        return _error(422, "engine_error", str(exc))

    @app.exception_handler(ValueError)
    def _handle_value_error(request: Request, exc: ValueError):
        return _error(422, "invalid_value", str(exc))

    def _session_or_404(session_id: str) -> Session:
        session = store.get(session_id)
        if session is None:
            raise _NotFound(session_id)
        return session

    class _NotFound(Exception):
        def __init__(self, session_id):
            self.session_id = session_id

    @app.exception_handler(_NotFound)
    def _handle_not_found(request: Request, exc: _NotFound):
        return _error(404, "unknown_session", f"no session {exc.session_id!r}")

    @app.get("/v1/scenarios")
    def list_scenarios():
        names = sorted(p.stem for p in Path(config.scenario_dir).glob("*.json"))
        return {"scenarios": names}

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            session = open_session(
                body.scenario,
                config.engine,
                session_id=uuid.uuid4().hex[:12],
                base_dir=Path(config.scenario_dir),
            )
        except FileNotFoundError:
            return _error(404, "unknown_scenario", f"no scenario {body.scenario!r}")
        store.add(session)
        return {"session": session.id, "state": session.state_payload()}

    @app.get("/v1/sessions/{session_id}/state")
    def get_state(session_id: str):
        return _session_or_404(session_id).state_payload()

    @app.post("/v1/sessions/{session_id}/query")
    def post_query(session_id: str, body: QueryBody):
        return _session_or_404(session_id).post_query(body.text)

    @app.post("/v1/sessions/{session_id}/rebuttal")
    def post_rebuttal(session_id: str, body: RebuttalBody):
        return _session_or_404(session_id).post_rebuttal(body.text)

    @app.post("/v1/sessions/{session_id}/ee-pose")
    def post_ee_pose(session_id: str, body: EePoseBody):
        if len(body.pose) != 3:
            return _error(422, "invalid_value", "pose must be a 3-vector")
        return _session_or_404(session_id).set_ee_pose(tuple(body.pose))

    @app.post("/v1/sessions/{session_id}/move")
    def post_move(session_id: str, body: MoveBody):
        session = _session_or_404(session_id)
        move = None
        if body.delta is not None:
            if len(body.delta) != 2:
                return _error(422, "invalid_value", "delta must be a 2-vector")
            move = BaseMove(body.delta[0], body.delta[1], body.dtheta)
        return session.move_base(move)

    @app.get("/v1/sessions/{session_id}/events")
    def events(session_id: str, from_version: int = 0, follow: int = 1):
        session = _session_or_404(session_id)

        def stream():
            last = from_version
            yield "retry: 1000\n\n"
            while True:
                frames = session.events_since(last)
                for frame in frames:
                    last = frame["version"]
                    yield (
                        f"id: {frame['version']}\n"
                        f"event: session\n"
                        f"data: {json.dumps(frame)}\n\n"
                    )
                if not follow:
                    return
                if not frames:
                    time.sleep(0.05)
                    yield ": keep-alive\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    ui_dir = config.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
