"""HTTP API over the engine.

REST-ish JSON plus server-sent events:
  POST /sessions                       create a session
  GET  /sessions/{id}                  session info incl. message history
  POST /sessions/{id}/messages         run a turn (blocks; queued per session)
  POST /sessions/{id}/files?name=f     upload raw file bytes
  GET  /sessions/{id}/events?after=n   SSE stream of trace events
  GET  /sessions/{id}/artifacts/{name} artifact bytes
  GET  /sessions/{id}/trace            JSON-lines trace + ledger totals
"""

from __future__ import annotations

import json
import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response, StreamingResponse
from pydantic import BaseModel

from ..agents.runtime import Engine
from ..config import ServiceConfig
from ..errors import ArtifactSecurityError
from .store import SessionService

_MEDIA_TYPES = {
    ".csv": "text/csv",
    ".json": "application/json",
    ".txt": "text/plain",
    ".mgf": "text/plain",
}


class MessageIn(BaseModel):
    text: str


def create_app(engine: Engine, config: ServiceConfig) -> FastAPI:
    service = SessionService(engine, config)
    app = FastAPI(title="metaboqa", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    def require_session(session_id: str) -> None:
        if not service.has_session(session_id):
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/sessions")
    def create_session():
        try:
            session_id = service.create_session()
        except OSError as exc:
            raise HTTPException(status_code=500, detail=f"session storage failed: {exc}")
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        require_session(session_id)
        session = engine.get_session(session_id)
        return {
            "session_id": session_id,
            "turns": session.turn_counter,
            "messages": [m.to_dict() for m in session.history],
            "uploaded_files": session.uploaded_files,
            "ledger": session.ledger.to_dict(),
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        require_session(session_id)
        final = service.post_message(session_id, message.text)
        session = engine.get_session(session_id)
        return {
            "final": final.to_dict(),
            "turn": session.turn_counter,
            "trace_length": len(session.trace),
        }

    @app.post("/sessions/{session_id}/files")
    async def upload_file(session_id: str, name: str, request: Request):
        require_session(session_id)
        data = await request.body()
        if len(data) > config.upload_cap_bytes:
            raise HTTPException(
                status_code=413,
                detail=f"file exceeds the {config.upload_cap_bytes} byte cap",
            )
        try:
            summary = service.upload(session_id, name, data)
        except ArtifactSecurityError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return summary.to_dict()

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str, after: int = 0):
        require_session(session_id)

        def generate():
            sent = after
            deadline = time.time() + config.sse_idle_timeout
            while True:
                session = engine.get_session(session_id)
                trace = session.trace
                while sent < len(trace):
                    event = trace[sent]
                    sent += 1
                    deadline = time.time() + config.sse_idle_timeout
                    yield (
                        f"id: {event.seq}\nevent: {event.kind}\n"
                        f"data: {json.dumps(event.to_dict())}\n\n"
                    )
                    if event.kind == "answer":
                        return
                if session_id not in service.active and time.time() > deadline:
                    return
                time.sleep(0.05)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str):
        require_session(session_id)
        if "/" in name or "\\" in name or ".." in name:
            # cross-session access / path escape
            raise HTTPException(status_code=403, detail="artifact names cannot traverse paths")
        path = engine.session_dir(session_id) / name
        resolved = path.resolve()
        if not resolved.is_relative_to(engine.session_dir(session_id).resolve()):
            raise HTTPException(status_code=403, detail="artifact path escapes the session")
        if not resolved.is_file():
            raise HTTPException(status_code=404, detail=f"no artifact named {name}")
        media_type = _MEDIA_TYPES.get(resolved.suffix.lower(), "application/octet-stream")
        return Response(content=resolved.read_bytes(), media_type=media_type)

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        require_session(session_id)
        return PlainTextResponse(
            service.trace_jsonl(session_id), media_type="application/x-ndjson"
        )

    return app
