#!/usr/bin/env python3
"""Run the bundled demo conversation offline, printing each turn.

Uses the replay cassette and the fixture graph; no credentials or
network access needed:

    python3 scripts/demo_replay.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from metaboqa.config import ServiceConfig, build_engine  # noqa: E402

GOLDEN_QUESTION = (
    "How many metabolites were annotated with SIRIUS in Tabernaemontana coffeoides "
    "with molecular formula score (ZODIAC) above 0.9 and confidence score (COSMIC) above 0.3?"
)
RANKING_QUESTION = (
    "Which plant extracts have the highest count of metabolites annotated "
    "as aspidosperma-type alkaloids?"
)
FOLLOWUP = "Can you generate a distribution plot for the count of features for those extracts?"
REJECTED = "What is the capital of France?"


def show(engine, session_id: str, question: str) -> None:
    print(f"\n>>> {question}")
    final = engine.run_turn(session_id, question)
    print(final.body)
    if final.attachments:
        print(f"[artifacts: {', '.join(final.attachments)}]")


def main() -> None:
    config = ServiceConfig.from_file(ROOT / "fixtures" / "config.demo.json")
    with tempfile.TemporaryDirectory() as tmp:
        config.artifacts_root = tmp
        engine = build_engine(config)
        engine.create_session("demo-a")
        show(engine, "demo-a", GOLDEN_QUESTION)
        engine.create_session("demo-b")
        show(engine, "demo-b", RANKING_QUESTION)
        show(engine, "demo-b", FOLLOWUP)
        engine.create_session("demo-c")
        show(engine, "demo-c", REJECTED)
        session = engine.get_session("demo-b")
        print(
            f"\n[session demo-b ledger: {session.ledger.calls} LLM calls, "
            f"{session.ledger.total_tokens} tokens]"
        )


if __name__ == "__main__":
    main()
