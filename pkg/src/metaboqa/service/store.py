"""Session lifecycle around the engine: per-session turn serialization
and JSON persistence under the artifact root (no database at desk scale)."""

from __future__ import annotations

import json
import logging
import threading
from typing import Optional

from ..agents.messages import AgentMessage, SessionState
from ..agents.runtime import Engine
from ..config import ServiceConfig

logger = logging.getLogger(__name__)

STATE_FILENAME = "state.json"


class SessionService:
    def __init__(self, engine: Engine, config: ServiceConfig):
        self.engine = engine
        self.config = config
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.active: set[str] = set()
        self._restore()

    def _restore(self) -> None:
        root = self.engine.artifacts_root
        if not root.is_dir():
            return
        for state_file in sorted(root.glob(f"*/{STATE_FILENAME}")):
            try:
                state = SessionState.from_dict(json.loads(state_file.read_text(encoding="utf-8")))
            except (ValueError, KeyError) as exc:
                logger.warning("skipping unreadable session state %s: %s", state_file, exc)
                continue
            self.engine.sessions[state.session_id] = state

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def create_session(self) -> str:
        state = self.engine.create_session()
        self.persist(state.session_id)
        return state.session_id

    def has_session(self, session_id: str) -> bool:
        return session_id in self.engine.sessions

    def post_message(self, session_id: str, text: str) -> AgentMessage:
        # a second message during an active turn queues behind the lock
        lock = self._lock_for(session_id)
        with lock:
            self.active.add(session_id)
            try:
                final = self.engine.run_turn(session_id, text)
            finally:
                self.active.discard(session_id)
                self.persist(session_id)
        return final

    def upload(self, session_id: str, filename: str, data: bytes):
        summary = self.engine.store_upload(session_id, filename, data)
        self.persist(session_id)
        return summary

    def persist(self, session_id: str) -> None:
        session = self.engine.get_session(session_id)
        directory = self.engine.session_dir(session_id)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / STATE_FILENAME).write_text(
            json.dumps(session.to_dict()), encoding="utf-8"
        )

    def trace_jsonl(self, session_id: str) -> str:
        """One TraceEvent per line, closed by a ledger-totals line."""
        session = self.engine.get_session(session_id)
        lines = [json.dumps(event.to_dict()) for event in session.trace]
        lines.append(json.dumps({"kind": "ledger_totals", **session.ledger.to_dict()}))
        return "\n".join(lines) + "\n"
