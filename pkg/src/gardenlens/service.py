"""HTTP service for the discussion community.

Endpoints mirror the forum domain types: sessions are created against a
named knowledge base, researcher messages trigger one agent round, and
`/events` streams the transcript as server-sent events (event id = seq)
so clients can resubscribe from the last seq they rendered.
"""

from __future__ import annotations

import asyncio
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse, StreamingResponse

from . import forum
from .analytics import AnalysisReport, load_report
from .errors import GardenlensError, KbLoadError, SessionTerminated
from .jsonutil import dumps_line

SSE_POLL_SECONDS = 0.05


class ServiceState:
    def __init__(self, kb_dir: Path, chat_backend: forum.ChatBackend, preset: str):
        self.kb_dir = kb_dir
        self.chat_backend = chat_backend
        self.preset = preset
        self.sessions: dict[str, forum.Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._counter = 0
        self._create_lock = threading.Lock()

    def kb_names(self) -> list[str]:
        return sorted(p.stem for p in self.kb_dir.glob("*.json"))

    def load_kb(self, name: str) -> AnalysisReport:
        path = self.kb_dir / f"{name}.json"
        if not path.exists():
            raise KeyError(name)
        return load_report(path)

    def new_session_id(self) -> str:
        with self._create_lock:
            self._counter += 1
            return f"s-{self._counter:04d}"


def create_app(kb_dir: Path, chat_backend: forum.ChatBackend | None = None,
               preset: str = "default", console_dir: Path | None = None) -> FastAPI:
    state = ServiceState(kb_dir=Path(kb_dir),
                         chat_backend=chat_backend or forum.CannedChatBackend(),
                         preset=preset)
    app = FastAPI(title="gardenlens discussion service")

    def get_session(session_id: str) -> forum.Session:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session

    def session_view(session: forum.Session, kb_name: str | None = None) -> dict:
        view = session.view()
        view["kb"] = getattr(session, "_kb_name", kb_name)
        return view

    @app.get("/kb")
    def list_kbs():
        return {"kbs": state.kb_names()}

    @app.get("/kb/{name}")
    def get_kb(name: str):
        try:
            return state.load_kb(name).data
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no knowledge base {name!r}")
        except KbLoadError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.get("/kb/{name}/query")
    def query_kb(name: str, path: str):
        try:
            kb = state.load_kb(name)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no knowledge base {name!r}")
        try:
            return {"path": path, "value": forum.kb_query(kb, path)}
        except GardenlensError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        kb_name = body.get("kb")
        try:
            kb = state.load_kb(kb_name)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no knowledge base {kb_name!r}")
        except KbLoadError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            roles = forum.roles_from_preset(body.get("preset", state.preset))
            session = forum.open_session(
                roles, kb, max_turns=int(body.get("max_turns", forum.DEFAULT_MAX_TURNS)),
                session_id=state.new_session_id())
        except GardenlensError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        session._kb_name = kb_name
        state.sessions[session.id] = session
        state.locks[session.id] = threading.Lock()
        return session_view(session)

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [session_view(s) for s in state.sessions.values()]}

    @app.get("/sessions/{session_id}")
    def get_session_view(session_id: str):
        session = get_session(session_id)
        view = session_view(session)
        view["messages"] = [m.to_json_dict() for m in session.transcript]
        return view

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict):
        session = get_session(session_id)
        content = body.get("content", "")
        if not isinstance(content, str) or not content.strip():
            raise HTTPException(status_code=400, detail="content must be a non-empty string")
        with state.locks[session_id]:
            try:
                new_messages = forum.post(session, content, state.chat_backend)
            except SessionTerminated as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except GardenlensError as exc:
                raise HTTPException(status_code=502, detail=str(exc))
        return {"messages": [m.to_json_dict() for m in new_messages]}

    @app.post("/sessions/{session_id}/terminate")
    def terminate_session(session_id: str):
        session = get_session(session_id)
        session.terminate()
        return session_view(session)

    @app.get("/sessions/{session_id}/transcript", response_class=PlainTextResponse)
    def get_transcript(session_id: str):
        session = get_session(session_id)
        lines = session.transcript_lines()
        return "\n".join(lines) + ("\n" if lines else "")

    @app.get("/sessions/{session_id}/tools/{digest}")
    def get_tool_entry(session_id: str, digest: str):
        session = get_session(session_id)
        entry = session.tool_log.get(digest)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"no tool entry {digest}")
        return {"digest": digest, **entry}

    @app.get("/sessions/{session_id}/events")
    async def stream_events(session_id: str, request: Request, since: int = 0):
        session = get_session(session_id)

        async def event_source():
            yield "retry: 500\n\n"
            cursor = since
            while True:
                while cursor < len(session.transcript):
                    message = session.transcript[cursor]
                    cursor = message.seq
                    payload = dumps_line(message.to_json_dict())
                    yield f"id: {message.seq}\nevent: message\ndata: {payload}\n\n"
                if session.state != "open":
                    yield "event: end\ndata: {}\n\n"
                    return
                if await request.is_disconnected():
                    return
                await asyncio.sleep(SSE_POLL_SECONDS)

        return StreamingResponse(event_source(), media_type="text/event-stream")

    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    return app
