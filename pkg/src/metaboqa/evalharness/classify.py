"""Failure taxonomy over turn traces.

Types:
  T1 - validator rejected a benchmark question
  T2 - an incorrect SPARQL query was generated
  T3 - a resolvable mention was present but the KG agent never ran
  T4 - the KG agent picked a tool that mismatches the mention kind

Pure function of (trace, verdict): identical inputs label identically.
Trace events may be TraceEvent objects or their dict form.
"""

from __future__ import annotations

from typing import Iterable, Union

from ..agents.messages import TraceEvent
from ..agents.parsing import TOOL_FOR_KIND

TraceLike = Union[TraceEvent, dict]


def _as_dict(event: TraceLike) -> dict:
    return event.to_dict() if isinstance(event, TraceEvent) else event


def classify_error(trace: Iterable[TraceLike], verdict: str) -> str:
    if verdict == "correct":
        return "none"
    events = [_as_dict(e) for e in trace]

    if any(e.get("kind") == "rejection" and e.get("agent") == "validator" for e in events):
        return "T1"

    kg_started = any(
        e.get("kind") == "agent_started" and e.get("agent") == "kg" for e in events
    )

    for event in events:
        if event.get("kind") == "tool_called" and event.get("agent") == "kg":
            kind = (event.get("payload") or {}).get("mention_kind")
            tool = event.get("tool")
            if kind and TOOL_FOR_KIND.get(kind) != tool:
                return "T4"

    mention_evidence = False
    for event in events:
        payload = event.get("payload") or {}
        if event.get("kind") == "routing" and payload.get("mentions"):
            mention_evidence = True
        if event.get("kind") == "tool_called" and event.get("tool") == "plant_db_checker":
            mention_evidence = True  # a taxon mention reached the validator
        if event.get("kind") == "tool_called" and event.get("agent") == "kg":
            mention_evidence = True
    if mention_evidence and not kg_started:
        return "T3"

    return "T2"
