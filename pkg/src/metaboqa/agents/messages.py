"""Conversation state: messages, trace events, and per-session ledger."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..gateway import BudgetLedger, TokenUsage

MESSAGE_KINDS = frozenset(
    {
        "user_question",
        "classification",
        "validation_verdict",
        "routing_directive",
        "resolved_entities",
        "query_result_ref",
        "interpretation",
        "final_answer",
        "error",
    }
)

# meta keys each kind must carry (body stays human-readable text)
_REQUIRED_META = {
    "classification": ("classification",),
    "validation_verdict": ("verdict",),
    "routing_directive": ("route",),
    "resolved_entities": ("entities",),
    "query_result_ref": ("row_count", "status"),
}


@dataclass
class AgentMessage:
    sender: str  # agent id or "user"
    kind: str
    body: str
    attachments: list[str] = field(default_factory=list)  # artifact names
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        for key in _REQUIRED_META.get(self.kind, ()):
            if key not in self.meta:
                raise ValueError(f"{self.kind} message requires meta[{key!r}]")

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "kind": self.kind,
            "body": self.body,
            "attachments": list(self.attachments),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentMessage":
        return cls(
            sender=d["sender"],
            kind=d["kind"],
            body=d["body"],
            attachments=list(d.get("attachments", [])),
            meta=dict(d.get("meta", {})),
        )


@dataclass
class TraceEvent:
    seq: int
    turn: int
    agent: str
    kind: str  # agent_started | llm_call | tool_called | query_generated |
    #            rows_spilled | warning | answer | error
    t_start: float
    t_end: float
    tool: Optional[str] = None
    payload: dict = field(default_factory=dict)
    usage: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {
            "seq": self.seq,
            "turn": self.turn,
            "agent": self.agent,
            "kind": self.kind,
            "t_start": self.t_start,
            "t_end": self.t_end,
        }
        if self.tool:
            d["tool"] = self.tool
        if self.payload:
            d["payload"] = self.payload
        if self.usage:
            d["usage"] = self.usage
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(
            seq=d["seq"],
            turn=d["turn"],
            agent=d["agent"],
            kind=d["kind"],
            t_start=d["t_start"],
            t_end=d["t_end"],
            tool=d.get("tool"),
            payload=dict(d.get("payload", {})),
            usage=d.get("usage"),
        )


class SessionState:
    """One conversation: append-only history, file registry, trace, ledger."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self._history: list[AgentMessage] = []
        self.uploaded_files: dict[str, dict] = {}  # logical name -> summary dict
        self._trace: list[TraceEvent] = []
        self.ledger = BudgetLedger()
        self.turn_counter = 0

    @property
    def history(self) -> tuple[AgentMessage, ...]:
        return tuple(self._history)

    @property
    def trace(self) -> tuple[TraceEvent, ...]:
        return tuple(self._trace)

    def append(self, message: AgentMessage) -> AgentMessage:
        self._history.append(message)
        return message

    def add_event(
        self,
        turn: int,
        agent: str,
        kind: str,
        tool: Optional[str] = None,
        payload: Optional[dict] = None,
        usage: Optional[TokenUsage] = None,
        t_start: Optional[float] = None,
    ) -> TraceEvent:
        now = time.time()
        if self._trace:
            # timestamps are monotone per session even if the clock steps back
            now = max(now, self._trace[-1].t_end)
        start = min(t_start if t_start is not None else now, now)
        event = TraceEvent(
            seq=len(self._trace) + 1,
            turn=turn,
            agent=agent,
            kind=kind,
            t_start=start,
            t_end=now,
            tool=tool,
            payload=payload or {},
            usage=usage.to_dict() if usage is not None else None,
        )
        self._trace.append(event)
        return event

    def last_message(self, kind: str) -> Optional[AgentMessage]:
        for message in reversed(self._history):
            if message.kind == kind:
                return message
        return None

    def register_upload(self, logical_name: str, summary: dict) -> None:
        self.uploaded_files[logical_name] = summary

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "history": [m.to_dict() for m in self._history],
            "uploaded_files": self.uploaded_files,
            "trace": [e.to_dict() for e in self._trace],
            "ledger": self.ledger.to_dict(),
            "turn_counter": self.turn_counter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionState":
        state = cls(d["session_id"])
        state._history = [AgentMessage.from_dict(m) for m in d.get("history", [])]
        state.uploaded_files = dict(d.get("uploaded_files", {}))
        state._trace = [TraceEvent.from_dict(e) for e in d.get("trace", [])]
        ledger = d.get("ledger", {})
        state.ledger.prompt_tokens = ledger.get("prompt_tokens", 0)
        state.ledger.completion_tokens = ledger.get("completion_tokens", 0)
        state.ledger.estimated_cost = ledger.get("estimated_cost", 0.0)
        state.ledger.calls = ledger.get("calls", 0)
        state.turn_counter = d.get("turn_counter", 0)
        return state
